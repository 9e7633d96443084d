"""Image quality metrics on magnitude images."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass
class MetricReport:
    """One experiment's quality numbers (psnr_db is inf for exact matches)."""

    psnr_db: float
    ssim: float
    method: str = ""
    reduction: Optional[float] = None
    seed: Optional[int] = None
    wall_seconds: Optional[float] = None


def _magnitudes(reference: np.ndarray, test: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    reference = np.asarray(reference)
    test = np.asarray(test)
    if reference.shape != test.shape:
        raise ValueError(
            f"shape mismatch: reference {reference.shape} vs test {test.shape}")
    return np.abs(reference).astype(np.float64), np.abs(test).astype(np.float64)


def psnr(reference: np.ndarray, test: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB; the peak is the reference's
    maximum magnitude. Inputs that agree to double-precision round-off
    (RMSE below 1e-12 of the peak) report +inf."""
    ref, tst = _magnitudes(reference, test)
    mse = float(np.mean((ref - tst) ** 2))
    peak = float(ref.max())
    if mse <= (peak * 1e-12) ** 2:
        return math.inf
    if peak == 0.0:
        return -math.inf
    return 10.0 * math.log10(peak * peak / mse)


def _gauss_window(n: int, sigma: float) -> np.ndarray:
    x = np.arange(n) - (n - 1) / 2.0
    w = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    return w / w.sum()


def _filt(img: np.ndarray, w: np.ndarray) -> np.ndarray:
    tmp = sliding_window_view(img, len(w), axis=0) @ w
    return sliding_window_view(tmp, len(w), axis=1) @ w


def ssim(reference: np.ndarray, test: np.ndarray,
         dynamic_range: Optional[float] = None) -> float:
    """Mean local SSIM with an 11x11 Gaussian window (sigma 1.5).

    The dynamic range defaults to the reference's maximum magnitude;
    passing it explicitly makes the metric symmetric in its arguments.
    """
    ref, tst = _magnitudes(reference, test)
    if min(ref.shape) < SSIM_WINDOW:
        raise ValueError(f"images must be at least {SSIM_WINDOW} pixels per side")
    dr = float(ref.max()) if dynamic_range is None else float(dynamic_range)
    if dr == 0.0:
        return 1.0 if np.array_equal(ref, tst) else 0.0
    c1 = (SSIM_K1 * dr) ** 2
    c2 = (SSIM_K2 * dr) ** 2

    w = _gauss_window(SSIM_WINDOW, SSIM_SIGMA)
    mu1 = _filt(ref, w)
    mu2 = _filt(tst, w)
    s11 = _filt(ref * ref, w) - mu1 * mu1
    s22 = _filt(tst * tst, w) - mu2 * mu2
    s12 = _filt(ref * tst, w) - mu1 * mu2

    num = (2 * mu1 * mu2 + c1) * (2 * s12 + c2)
    den = (mu1 ** 2 + mu2 ** 2 + c1) * (s11 + s22 + c2)
    return float(np.mean(num / den))
