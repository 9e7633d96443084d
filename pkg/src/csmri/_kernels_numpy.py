"""Pure-numpy implementations of the hot kernels.

Reference semantics for the numba backend; selected with
CSMRI_BACKEND=numpy. Everything operates on float64 2D/3D arrays.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from csmri._kernels_common import block_grid, check_block_params, dct_matrix

AGG_STEP = 3  # reference-block stride for block matching


def conv2d(xp: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Valid cross-correlation of a pre-padded stack.

    xp: (Ci, H + kh - 1, W + kw - 1), w: (Co, Ci, kh, kw) -> (Co, H, W).
    """
    kh, kw = w.shape[2], w.shape[3]
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))  # (Ci, H, W, kh, kw)
    return np.tensordot(w, win, axes=([1, 2, 3], [0, 3, 4]))


def conv2d_wgrad(xp: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Weight gradient of conv2d: correlate the padded input with the
    output gradient. xp: (Ci, Hp, Wp), g: (Co, H, W) -> (Co, Ci, kh, kw)."""
    kh = xp.shape[1] - g.shape[1] + 1
    kw = xp.shape[2] - g.shape[2] + 1
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))
    return np.tensordot(g, win, axes=([1, 2], [1, 2]))


def dct_denoise(img: np.ndarray, sigma: float, block: int = 8,
                thresh_mult: float = 2.7) -> np.ndarray:
    """Sliding-window DCT hard thresholding with uniform aggregation.

    Every block position (stride 1) is transformed, coefficients below
    thresh_mult * sigma are zeroed (block DC exempt) and the inverses are
    averaged back.
    """
    check_block_params(img.shape, block, block)
    h, w = img.shape
    b = block
    d = dct_matrix(b)
    blocks = sliding_window_view(img, (b, b))  # (nh, nw, b, b)
    coef = np.einsum("ab,ijbc,dc->ijad", d, blocks, d, optimize=True)
    keep = np.abs(coef) >= thresh_mult * sigma
    keep[..., 0, 0] = True
    coef = coef * keep
    rec = np.einsum("ba,ijbc,cd->ijad", d, coef, d, optimize=True)

    num = np.zeros((h, w))
    den = np.zeros((h, w))
    nh, nw = rec.shape[0], rec.shape[1]
    for bi in range(b):
        for bj in range(b):
            num[bi:bi + nh, bj:bj + nw] += rec[:, :, bi, bj]
            den[bi:bi + nh, bj:bj + nw] += 1.0
    return num / den


def bm3d_ht(img: np.ndarray, sigma: float, block: int = 8, window: int = 24,
            max_blocks: int = 16, thresh_mult: float = 2.7,
            step: int = AGG_STEP) -> np.ndarray:
    """Hard-thresholding stage of BM3D.

    Block matching inside a local search window, 2D DCT per block plus a
    DCT along the matched stack, hard threshold at thresh_mult * sigma
    (group DC exempt) and weighted aggregation with per-group weights
    1 / n_retained.
    """
    h, w = img.shape
    b = block
    s = check_block_params(img.shape, block, window)
    nc = s - b + 1
    k = min(max_blocks, nc * nc)
    refs_y = block_grid(h, b, step)
    refs_x = block_grid(w, b, step)
    d2 = dct_matrix(b)
    dk = dct_matrix(k)
    thr = thresh_mult * sigma

    n_groups = len(refs_y) * len(refs_x)
    stacks = np.empty((n_groups, k, b, b))
    pos_y = np.empty((n_groups, k), dtype=np.int64)
    pos_x = np.empty((n_groups, k), dtype=np.int64)

    gi = 0
    for ry in refs_y:
        wy = min(max(ry + b // 2 - s // 2, 0), h - s)
        for rx in refs_x:
            wx = min(max(rx + b // 2 - s // 2, 0), w - s)
            cands = sliding_window_view(img[wy:wy + s, wx:wx + s], (b, b))
            ref = img[ry:ry + b, rx:rx + b]
            dist = ((cands - ref) ** 2).sum(axis=(2, 3)).ravel()
            # the reference always leads its own group; the rest follow in
            # distance-then-index order so ties resolve deterministically
            dist[(ry - wy) * nc + (rx - wx)] = -1.0
            sel = np.lexsort((np.arange(dist.size), dist))[:k]
            cy, cx = np.unravel_index(sel, (nc, nc))
            stacks[gi] = cands.reshape(nc * nc, b, b)[sel]
            pos_y[gi] = wy + cy
            pos_x[gi] = wx + cx
            gi += 1

    coef = np.einsum("ab,gkbc,dc->gkad", d2, stacks, d2, optimize=True)
    coef = np.einsum("pk,gkab->gpab", dk, coef, optimize=True)
    keep = np.abs(coef) >= thr
    keep[:, 0, 0, 0] = True
    n_ret = np.maximum((keep & (coef != 0)).sum(axis=(1, 2, 3)), 1)
    coef = coef * keep
    coef = np.einsum("pk,gpab->gkab", dk, coef, optimize=True)
    filtered = np.einsum("ba,gkbc,cd->gkad", d2, coef, d2, optimize=True)
    weights = 1.0 / n_ret

    num = np.zeros((h, w))
    den = np.zeros((h, w))
    offs = (np.arange(b)[:, None] * w + np.arange(b)[None, :]).ravel()
    base = (pos_y * w + pos_x).reshape(n_groups, k, 1)
    idx = (base + offs).ravel()
    np.add.at(num.ravel(), idx,
              (weights[:, None, None] * filtered.reshape(n_groups, k, -1)).ravel())
    np.add.at(den.ravel(), idx,
              np.broadcast_to(weights[:, None, None],
                              (n_groups, k, b * b)).ravel())
    return num / den
