#!/usr/bin/env python3
"""Compare the numba and numpy kernel backends on representative sizes.

Usage: python benchmarks/bench_kernels.py [--repeats N]

Times the four hot kernels (conv2d forward, conv2d weight gradient, BM3D
hard-threshold stage, sliding-DCT denoiser) and reports both backends and
their ratio. The numba path is warmed up (and disk-cached) before timing.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from csmri import _kernels_numpy as knp

try:
    from csmri import _kernels_numba as knb
except ImportError:
    knb = None


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    cases = []

    for ci, co, hw in [(2, 16, 128), (16, 16, 128), (64, 64, 128)]:
        xp = rng.standard_normal((ci, hw + 2, hw + 2))
        w = rng.standard_normal((co, ci, 3, 3))
        g = rng.standard_normal((co, hw, hw))
        cases.append((f"conv2d {ci}->{co} @{hw}^2",
                      lambda xp=xp, w=w: knp.conv2d(xp, w),
                      (lambda xp=xp, w=w: knb.conv2d(xp, w)) if knb else None))
        cases.append((f"conv2d_wgrad {ci}->{co} @{hw}^2",
                      lambda xp=xp, g=g: knp.conv2d_wgrad(xp, g),
                      (lambda xp=xp, g=g: knb.conv2d_wgrad(xp, g)) if knb else None))

    for hw in (128, 256):
        img = rng.standard_normal((hw, hw))
        cases.append((f"bm3d_ht @{hw}^2",
                      lambda img=img: knp.bm3d_ht(img, 0.05),
                      (lambda img=img: knb.bm3d_ht(img, 0.05)) if knb else None))
        cases.append((f"dct_denoise @{hw}^2",
                      lambda img=img: knp.dct_denoise(img, 0.05),
                      (lambda img=img: knb.dct_denoise(img, 0.05)) if knb else None))

    print(f"{'kernel':34s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s}")
    for name, f_np, f_nb in cases:
        t_np = best_of(f_np, args.repeats)
        if f_nb is None:
            print(f"{name:34s} {t_np * 1e3:9.2f}ms {'n/a':>10s}")
            continue
        f_nb()  # warm-up / JIT
        t_nb = best_of(f_nb, args.repeats)
        print(f"{name:34s} {t_np * 1e3:9.2f}ms {t_nb * 1e3:9.2f}ms "
              f"{t_np / t_nb:7.1f}x")

    if knb is None:
        print("\nnumba unavailable; only the numpy fallback was timed")


if __name__ == "__main__":
    main()
