"""Centered orthonormal 2D Fourier operators and the masked maps.

k-space is stored DC-centered (DC at index (H//2, W//2)); the transforms
are unitary so the masked adjoint really is the adjoint and data
consistency is an orthogonal projection. Only even dimensions are
supported.
"""

from __future__ import annotations

import numpy as np

from csmri.masks import SamplingMask


def _check_grid(a: np.ndarray, name: str = "input") -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2D, got shape {a.shape}")
    if a.shape[0] % 2 or a.shape[1] % 2:
        raise ValueError(f"{name} dimensions must be even, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a.astype(np.complex128, copy=False)


def _check_pair(a: np.ndarray, mask: SamplingMask, name: str) -> np.ndarray:
    a = _check_grid(a, name)
    if a.shape != mask.shape:
        raise ValueError(f"{name} shape {a.shape} != mask shape {mask.shape}")
    return a


def fft2c(img: np.ndarray) -> np.ndarray:
    """Centered, orthonormal 2D DFT (image -> k-space)."""
    img = _check_grid(img, "image")
    return np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(img), norm="ortho"))


def ifft2c(ksp: np.ndarray) -> np.ndarray:
    """Inverse (and adjoint) of fft2c (k-space -> image)."""
    ksp = _check_grid(ksp, "k-space")
    return np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(ksp), norm="ortho"))


def forward_masked(img: np.ndarray, mask: SamplingMask) -> np.ndarray:
    """Masked forward transform: fft2c with unsampled entries zeroed."""
    img = _check_pair(img, mask, "image")
    return np.where(mask.sampled, fft2c(img), 0.0 + 0.0j)


def adjoint_masked(ksp: np.ndarray, mask: SamplingMask) -> np.ndarray:
    """Adjoint of forward_masked; for measured data this is the
    zero-filled reconstruction."""
    ksp = _check_pair(ksp, mask, "k-space")
    return ifft2c(np.where(mask.sampled, ksp, 0.0 + 0.0j))


def data_consistency(img: np.ndarray, ksp: np.ndarray,
                     mask: SamplingMask) -> np.ndarray:
    """Replace the image's k-space coefficients with the measured values
    at sampled locations, keeping its own coefficients elsewhere."""
    img = _check_pair(img, mask, "image")
    ksp = _check_pair(ksp, mask, "k-space")
    return ifft2c(np.where(mask.sampled, ksp, fft2c(img)))
