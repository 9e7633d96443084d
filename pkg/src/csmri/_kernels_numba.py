"""Numba-jitted implementations of the hot kernels.

Same contracts as ``_kernels_numpy``; selected by default when numba is
importable. Parallel loops never share output rows, and aggregation runs
in a fixed serial order, so results do not depend on the thread count.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

from csmri._kernels_common import block_grid, check_block_params, dct_matrix

AGG_STEP = 3


@njit(cache=True, parallel=True, fastmath=True)
def _conv2d(xp, w, out):
    co, ci, kh, kw = w.shape
    height, width = out.shape[1], out.shape[2]
    for i in prange(height):
        for oc in range(co):
            row = out[oc, i]
            for ic in range(ci):
                for ki in range(kh):
                    xrow = xp[ic, i + ki]
                    for kj in range(kw):
                        wv = w[oc, ic, ki, kj]
                        for j in range(width):
                            row[j] += wv * xrow[j + kj]


@njit(cache=True, parallel=True, fastmath=True)
def _conv2d_wgrad(xp, g, gw):
    co, height, width = g.shape
    ci, kh, kw = gw.shape[1], gw.shape[2], gw.shape[3]
    for oc in prange(co):
        for ic in range(ci):
            for ki in range(kh):
                for kj in range(kw):
                    acc = 0.0
                    for i in range(height):
                        grow = g[oc, i]
                        xrow = xp[ic, i + ki]
                        for j in range(width):
                            acc += grow[j] * xrow[j + kj]
                    gw[oc, ic, ki, kj] = acc


def conv2d(xp: np.ndarray, w: np.ndarray) -> np.ndarray:
    kh, kw = w.shape[2], w.shape[3]
    h = xp.shape[1] - kh + 1
    wd = xp.shape[2] - kw + 1
    out = np.zeros((w.shape[0], h, wd))
    _conv2d(np.ascontiguousarray(xp), np.ascontiguousarray(w), out)
    return out


def conv2d_wgrad(xp: np.ndarray, g: np.ndarray) -> np.ndarray:
    kh = xp.shape[1] - g.shape[1] + 1
    kw = xp.shape[2] - g.shape[2] + 1
    gw = np.empty((g.shape[0], xp.shape[0], kh, kw))
    _conv2d_wgrad(np.ascontiguousarray(xp), np.ascontiguousarray(g), gw)
    return gw


@njit(cache=True, parallel=True, fastmath=True)
def _dct_filter_blocks(img, d, thr, rec):
    nh, nw = rec.shape[0], rec.shape[1]
    b = d.shape[0]
    for i0 in prange(nh):
        tmp = np.empty((b, b))
        coef = np.empty((b, b))
        for j0 in range(nw):
            # coef = D @ block @ D.T
            for r in range(b):
                for c in range(b):
                    acc = 0.0
                    for t in range(b):
                        acc += d[r, t] * img[i0 + t, j0 + c]
                    tmp[r, c] = acc
            for r in range(b):
                for c in range(b):
                    acc = 0.0
                    for t in range(b):
                        acc += tmp[r, t] * d[c, t]
                    coef[r, c] = acc
            for r in range(b):
                for c in range(b):
                    if not (r == 0 and c == 0) and abs(coef[r, c]) < thr:
                        coef[r, c] = 0.0
            # rec = D.T @ coef @ D
            for r in range(b):
                for c in range(b):
                    acc = 0.0
                    for t in range(b):
                        acc += d[t, r] * coef[t, c]
                    tmp[r, c] = acc
            for r in range(b):
                for c in range(b):
                    acc = 0.0
                    for t in range(b):
                        acc += tmp[r, t] * d[t, c]
                    rec[i0, j0, r, c] = acc


@njit(cache=True)
def _dct_aggregate(rec, num, den):
    nh, nw, b = rec.shape[0], rec.shape[1], rec.shape[2]
    for i0 in range(nh):
        for j0 in range(nw):
            for r in range(b):
                for c in range(b):
                    num[i0 + r, j0 + c] += rec[i0, j0, r, c]
                    den[i0 + r, j0 + c] += 1.0


def dct_denoise(img: np.ndarray, sigma: float, block: int = 8,
                thresh_mult: float = 2.7) -> np.ndarray:
    check_block_params(img.shape, block, block)
    h, w = img.shape
    d = dct_matrix(block)
    rec = np.empty((h - block + 1, w - block + 1, block, block))
    _dct_filter_blocks(np.ascontiguousarray(img), d, thresh_mult * sigma, rec)
    num = np.zeros((h, w))
    den = np.zeros((h, w))
    _dct_aggregate(rec, num, den)
    return num / den


@njit(cache=True, parallel=True, fastmath=True)
def _bm3d_pass1(img, refs_y, refs_x, b, s, k, d2, dk, thr,
                stacks, pos_y, pos_x, weights):
    h, w = img.shape
    nrx = refs_x.shape[0]
    nc = s - b + 1
    for gi in prange(refs_y.shape[0] * nrx):
        ry = refs_y[gi // nrx]
        rx = refs_x[gi % nrx]
        wy = min(max(ry + b // 2 - s // 2, 0), h - s)
        wx = min(max(rx + b // 2 - s // 2, 0), w - s)

        # top-k matches by SSD; strict comparisons keep the earliest
        # candidate on ties (same order as the numpy backend), and the
        # reference itself always leads its own group
        best_d = np.full(k, np.inf)
        best_y = np.zeros(k, np.int64)
        best_x = np.zeros(k, np.int64)
        for cy in range(nc):
            for cx in range(nc):
                yy = wy + cy
                xx = wx + cx
                if yy == ry and xx == rx:
                    dist = -1.0
                else:
                    dist = 0.0
                    for bi in range(b):
                        for bj in range(b):
                            t = img[yy + bi, xx + bj] - img[ry + bi, rx + bj]
                            dist += t * t
                if dist < best_d[k - 1]:
                    p = k - 1
                    while p > 0 and dist < best_d[p - 1]:
                        best_d[p] = best_d[p - 1]
                        best_y[p] = best_y[p - 1]
                        best_x[p] = best_x[p - 1]
                        p -= 1
                    best_d[p] = dist
                    best_y[p] = yy
                    best_x[p] = xx

        # 2D DCT of each matched block
        coef = np.empty((k, b, b))
        tmp = np.empty((b, b))
        for m in range(k):
            y0 = best_y[m]
            x0 = best_x[m]
            for r in range(b):
                for c in range(b):
                    acc = 0.0
                    for t in range(b):
                        acc += d2[r, t] * img[y0 + t, x0 + c]
                    tmp[r, c] = acc
            for r in range(b):
                for c in range(b):
                    acc = 0.0
                    for t in range(b):
                        acc += tmp[r, t] * d2[c, t]
                    coef[m, r, c] = acc

        # DCT along the stack, hard threshold (group DC exempt), inverse
        tcol = np.empty(k)
        n_ret = 0
        for r in range(b):
            for c in range(b):
                for m in range(k):
                    acc = 0.0
                    for t in range(k):
                        acc += dk[m, t] * coef[t, r, c]
                    tcol[m] = acc
                for m in range(k):
                    v = tcol[m]
                    if not (m == 0 and r == 0 and c == 0) and abs(v) < thr:
                        tcol[m] = 0.0
                    elif v != 0.0:
                        n_ret += 1
                for m in range(k):
                    acc = 0.0
                    for t in range(k):
                        acc += dk[t, m] * tcol[t]
                    coef[m, r, c] = acc

        for m in range(k):
            for r in range(b):
                for c in range(b):
                    acc = 0.0
                    for t in range(b):
                        acc += d2[t, r] * coef[m, t, c]
                    tmp[r, c] = acc
            for r in range(b):
                for c in range(b):
                    acc = 0.0
                    for t in range(b):
                        acc += tmp[r, t] * d2[t, c]
                    stacks[gi, m, r, c] = acc
            pos_y[gi, m] = best_y[m]
            pos_x[gi, m] = best_x[m]
        weights[gi] = 1.0 / max(n_ret, 1)


@njit(cache=True)
def _bm3d_aggregate(stacks, pos_y, pos_x, weights, num, den):
    n_groups, k, b = stacks.shape[0], stacks.shape[1], stacks.shape[2]
    for g in range(n_groups):
        wt = weights[g]
        for m in range(k):
            y0 = pos_y[g, m]
            x0 = pos_x[g, m]
            for r in range(b):
                for c in range(b):
                    num[y0 + r, x0 + c] += wt * stacks[g, m, r, c]
                    den[y0 + r, x0 + c] += wt


def bm3d_ht(img: np.ndarray, sigma: float, block: int = 8, window: int = 24,
            max_blocks: int = 16, thresh_mult: float = 2.7,
            step: int = AGG_STEP) -> np.ndarray:
    h, w = img.shape
    s = check_block_params(img.shape, block, window)
    nc = s - block + 1
    k = min(max_blocks, nc * nc)
    refs_y = block_grid(h, block, step)
    refs_x = block_grid(w, block, step)
    n_groups = len(refs_y) * len(refs_x)

    stacks = np.empty((n_groups, k, block, block))
    pos_y = np.empty((n_groups, k), dtype=np.int64)
    pos_x = np.empty((n_groups, k), dtype=np.int64)
    weights = np.empty(n_groups)
    _bm3d_pass1(np.ascontiguousarray(img), refs_y, refs_x, block, s, k,
                dct_matrix(block), dct_matrix(k), thresh_mult * sigma,
                stacks, pos_y, pos_x, weights)

    num = np.zeros((h, w))
    den = np.zeros((h, w))
    _bm3d_aggregate(stacks, pos_y, pos_x, weights, num, den)
    return num / den
