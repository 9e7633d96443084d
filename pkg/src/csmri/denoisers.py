"""Gaussian denoisers and the Monte-Carlo divergence estimator.

Two reference denoisers are provided: a sliding-window DCT hard
thresholder (fast) and the hard-thresholding stage of BM3D (block
matching + 3D collaborative filtering). Complex images are denoised as
two independent real channels. The divergence estimator feeds the
Onsager correction of the message-passing solver.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from csmri import backend

DCT_HARD_THRESHOLD = "dct_hard_threshold"
BLOCK_MATCH_3D_HT = "block_match_3d_ht"

DenoiseFn = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class DenoiserKind:
    """Denoiser selection plus its block-processing parameters."""

    variant: str = BLOCK_MATCH_3D_HT
    block_size: int = 8
    search_window: int = 24
    max_blocks: int = 16
    threshold_mult: float = 2.7

    def __post_init__(self):
        if self.variant not in (DCT_HARD_THRESHOLD, BLOCK_MATCH_3D_HT):
            raise ValueError(f"unknown denoiser variant {self.variant!r}")
        if not 0 < self.block_size <= self.search_window:
            raise ValueError("need 0 < block_size <= search_window")
        if self.max_blocks < 1:
            raise ValueError("max_blocks must be >= 1")


def denoise(img: np.ndarray, sigma: float, kind: DenoiserKind) -> np.ndarray:
    """Denoise a complex image at noise level sigma.

    Real and imaginary channels are filtered independently; sigma = 0
    returns the input unchanged.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    img = np.asarray(img, dtype=np.complex128)
    if sigma == 0:
        return img.copy()

    k = backend.kernels()
    if kind.variant == DCT_HARD_THRESHOLD:
        def run(chan):
            return k.dct_denoise(chan, sigma, block=kind.block_size,
                                 thresh_mult=kind.threshold_mult)
    else:
        def run(chan):
            return k.bm3d_ht(chan, sigma, block=kind.block_size,
                             window=kind.search_window,
                             max_blocks=kind.max_blocks,
                             thresh_mult=kind.threshold_mult)

    re = run(np.ascontiguousarray(img.real))
    im = run(np.ascontiguousarray(img.imag))
    return re + 1j * im


def _as_denoise_fn(denoiser: Union[DenoiserKind, DenoiseFn]) -> DenoiseFn:
    if isinstance(denoiser, DenoiserKind):
        return lambda r, s: denoise(r, s, denoiser)
    return denoiser


def mc_divergence(denoiser: Union[DenoiserKind, DenoiseFn], r: np.ndarray,
                  sigma: float, epsilon: float, probes: int, seed: int,
                  base: np.ndarray | None = None) -> float:
    """Monte-Carlo estimate of the divergence of D(.) at r.

    Averages Re<b, D(r + eps*b) - D(r)> / eps over i.i.d. standard
    complex-Gaussian probes b. `base` optionally supplies a precomputed
    D(r, sigma) so the solver can reuse its denoising step. Deterministic
    given seed.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if probes < 1:
        raise ValueError(f"probes must be >= 1, got {probes}")
    fn = _as_denoise_fn(denoiser)
    r = np.asarray(r, dtype=np.complex128)
    if base is None:
        base = fn(r, sigma)

    rng = np.random.default_rng(seed)
    total = 0.0
    for _ in range(probes):
        b = (rng.standard_normal(r.shape) + 1j * rng.standard_normal(r.shape))
        b /= np.sqrt(2.0)
        delta = fn(r + epsilon * b, sigma) - base
        total += float(np.real(np.vdot(b, delta))) / epsilon
    return total / probes
