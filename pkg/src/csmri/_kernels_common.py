"""Shared pieces for the two kernel backends."""

from __future__ import annotations

import numpy as np


def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II matrix of size n x n (D @ D.T == I)."""
    k = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    d = np.cos(np.pi * (2 * j + 1) * k / (2 * n))
    d[0] *= np.sqrt(1.0 / n)
    d[1:] *= np.sqrt(2.0 / n)
    return d


def block_grid(extent: int, block: int, step: int) -> np.ndarray:
    """Reference-block origins along one axis; the last block is always
    flush with the border so every pixel is covered."""
    if extent < block:
        raise ValueError(f"image extent {extent} smaller than block size {block}")
    pos = list(range(0, extent - block + 1, step))
    if pos[-1] != extent - block:
        pos.append(extent - block)
    return np.asarray(pos, dtype=np.int64)


def check_block_params(shape: tuple[int, int], block: int, window: int) -> int:
    """Validate block/search-window sizes; returns the effective window
    (clamped to the image side)."""
    side = min(shape)
    eff = min(window, side)
    if block > eff:
        raise ValueError(
            f"block size {block} exceeds search window {eff} for image {shape}"
        )
    return eff
