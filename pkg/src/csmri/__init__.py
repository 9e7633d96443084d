"""Single-image self-supervised compressed-sensing MRI reconstruction.

Couples a trainable cascade of convolutional denoising blocks (with data
consistency) to hand-crafted CS solvers (ISTA, D-AMP) through an
ADMM/RED splitting, entirely on the CPU with numpy (+ optional numba
kernels).
"""

from csmri.backend import active_backend
from csmri.cascade import (NetworkArch, NetworkParams, cascade_forward,
                           combined_loss, init_params, load_params,
                           save_params, ss_loss, train_step)
from csmri.damp import DampTrace, SolverDiverged, damp_reconstruct, ista_reconstruct
from csmri.denoisers import DenoiserKind, denoise, mc_divergence
from csmri.fourier import (adjoint_masked, data_consistency, fft2c,
                           forward_masked, ifft2c)
from csmri.masks import (MaskSpec, SamplingMask, SubsetPair,
                         generate_cartesian_mask, split_subsets)
from csmri.metrics import MetricReport, psnr, ssim
from csmri.phantom import shepp_logan
from csmri.selfsup import (ReconConfig, multiplier_update, red_update,
                           train_ss, train_ss_red)

__version__ = "0.1.0"

__all__ = [
    "DampTrace", "DenoiserKind", "MaskSpec", "MetricReport", "NetworkArch",
    "NetworkParams", "ReconConfig", "SamplingMask", "SolverDiverged",
    "SubsetPair", "active_backend", "adjoint_masked", "cascade_forward",
    "combined_loss", "damp_reconstruct", "data_consistency", "denoise",
    "fft2c", "forward_masked", "generate_cartesian_mask", "ifft2c",
    "init_params", "ista_reconstruct", "load_params", "mc_divergence",
    "multiplier_update", "psnr", "red_update", "save_params", "shepp_logan",
    "split_subsets", "ss_loss", "ssim", "train_ss", "train_ss_red",
    "train_step",
]
