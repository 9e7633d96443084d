"""Shepp-Logan head phantom (desk-scale ground truth)."""

from __future__ import annotations

import numpy as np

# (intensity, a, b, x0, y0, phi_deg) -- the classic 10-ellipse table
_ELLIPSES = [
    (2.00, 0.6900, 0.9200, 0.00, 0.0000, 0.0),
    (-0.98, 0.6624, 0.8740, 0.00, -0.0184, 0.0),
    (-0.02, 0.1100, 0.3100, 0.22, 0.0000, -18.0),
    (-0.02, 0.1600, 0.4100, -0.22, 0.0000, 18.0),
    (0.01, 0.2100, 0.2500, 0.00, 0.3500, 0.0),
    (0.01, 0.0460, 0.0460, 0.00, 0.1000, 0.0),
    (0.01, 0.0460, 0.0460, 0.00, -0.1000, 0.0),
    (0.01, 0.0460, 0.0230, -0.08, -0.6050, 0.0),
    (0.01, 0.0230, 0.0230, 0.00, -0.6050, 0.0),
    (0.01, 0.0230, 0.0460, 0.06, -0.6050, 0.0),
]
_PEAK = 2.0  # skull-ring intensity; divides the sum into [0, 1]


def ellipse_sum(x: float, y: float) -> float:
    """Cumulative ellipse intensity at a point of [-1, 1]^2, scaled to
    [0, 1]. Mostly useful as an analytic cross-check of the raster."""
    total = 0.0
    for amp, a, b, x0, y0, phi in _ELLIPSES:
        c, s = np.cos(np.radians(phi)), np.sin(np.radians(phi))
        xr = (x - x0) * c + (y - y0) * s
        yr = (y - y0) * c - (x - x0) * s
        if (xr / a) ** 2 + (yr / b) ** 2 <= 1.0:
            total += amp
    return total / _PEAK


def shepp_logan(height: int, width: int) -> np.ndarray:
    """Rasterise the phantom onto a height x width grid.

    Pixel (height//2, width//2) sits exactly at the origin, matching the
    DC-centered k-space convention. Returns a complex image with zero
    imaginary part and magnitudes in [0, 1].
    """
    if height < 32 or width < 32 or height % 2 or width % 2:
        raise ValueError(
            f"phantom dimensions must be even and >= 32, got {height}x{width}")
    xs = (np.arange(width) - width // 2) * (2.0 / width)
    ys = (height // 2 - np.arange(height)) * (2.0 / height)
    xg, yg = np.meshgrid(xs, ys)

    img = np.zeros((height, width))
    for amp, a, b, x0, y0, phi in _ELLIPSES:
        c, s = np.cos(np.radians(phi)), np.sin(np.radians(phi))
        xr = (xg - x0) * c + (yg - y0) * s
        yr = (yg - y0) * c - (xg - x0) * s
        img[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += amp
    return (img / _PEAK).astype(np.complex128)
