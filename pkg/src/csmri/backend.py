"""Kernel backend selection.

The hot inner loops (block matching, 3D collaborative filtering, sliding
DCT, convolution layers) exist twice: a numba-jitted implementation and a
pure-numpy one. The numba path is the default whenever numba imports; set

    CSMRI_BACKEND=numpy   force the pure-numpy kernels
    CSMRI_BACKEND=numba   force numba (raises if numba is unavailable)
    CSMRI_THREADS=<n>     cap numba's internal thread count

Both paths satisfy the same contracts; ``benchmarks/bench_kernels.py``
compares their speed.
"""

from __future__ import annotations

import os

_kernels = None
_name = None


def _select() -> tuple[object, str]:
    forced = os.environ.get("CSMRI_BACKEND", "").strip().lower()
    if forced not in ("", "numpy", "numba"):
        raise ValueError(f"CSMRI_BACKEND must be 'numpy' or 'numba', got {forced!r}")

    if forced == "numpy":
        from csmri import _kernels_numpy

        return _kernels_numpy, "numpy"

    try:
        from csmri import _kernels_numba
    except ImportError:
        if forced == "numba":
            raise
        from csmri import _kernels_numpy

        return _kernels_numpy, "numpy"
    return _kernels_numba, "numba"


def kernels():
    """Return the active kernel module (lazy, cached)."""
    global _kernels, _name
    if _kernels is None:
        _kernels, _name = _select()
        if _name == "numba":
            _apply_thread_cap()
    return _kernels


def active_backend() -> str:
    """Name of the backend in use: 'numba' or 'numpy'."""
    kernels()
    return _name


def _apply_thread_cap() -> None:
    cap = os.environ.get("CSMRI_THREADS", "").strip()
    if not cap:
        return
    import numba

    n = max(1, min(int(cap), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
