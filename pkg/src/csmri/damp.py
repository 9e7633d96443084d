"""Hand-crafted CS solvers: ISTA baseline and D-AMP.

D-AMP adds the Onsager correction term z * div D(r) / m to the k-space
residual, which keeps the effective noise of r approximately Gaussian and
lets sigma be tracked per iteration as ||z||_2 / sqrt(m).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from csmri.denoisers import DenoiserKind, _as_denoise_fn, mc_divergence
from csmri.fourier import adjoint_masked, forward_masked
from csmri.masks import SamplingMask
from csmri.metrics import psnr

ONSAGER_CLAMP = 1.0  # |z * div/m| scale limit, guards pathological denoisers


class SolverDiverged(RuntimeError):
    """Raised when an iterate goes non-finite; carries the trace so far."""

    def __init__(self, message: str, trace: "DampTrace"):
        super().__init__(message)
        self.trace = trace


@dataclass
class DampTrace:
    """Per-iteration solver diagnostics."""

    sigma_hat: list[float] = field(default_factory=list)
    residual_norm: list[float] = field(default_factory=list)
    divergence: list[float] = field(default_factory=list)
    onsager_clamped: list[bool] = field(default_factory=list)
    psnr_db: list[float] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.sigma_hat)


def _record(trace, sigma, z, div, clamped, reference, x):
    trace.sigma_hat.append(float(sigma))
    trace.residual_norm.append(float(np.linalg.norm(z)))
    trace.divergence.append(float(div))
    trace.onsager_clamped.append(bool(clamped))
    if reference is not None:
        trace.psnr_db.append(psnr(reference, x))


def ista_reconstruct(y: np.ndarray, mask: SamplingMask,
                     kind: Union[DenoiserKind, Callable],
                     sigma_schedule: Sequence[float], iters: int,
                     reference: Optional[np.ndarray] = None,
                     ) -> tuple[np.ndarray, DampTrace]:
    """Iterative shrinkage-thresholding: gradient step on the masked
    k-space residual, then denoising at the scheduled sigma.

    sigma_schedule must have one entry per iteration or a single entry
    that is broadcast. iters = 0 returns the zero-filled estimate.
    """
    schedule = list(sigma_schedule)
    if len(schedule) == 1:
        schedule = schedule * max(iters, 1)
    if len(schedule) < iters:
        raise ValueError(
            f"sigma schedule has {len(schedule)} entries for {iters} iterations")
    fn = _as_denoise_fn(kind)

    y = np.asarray(y, dtype=np.complex128)
    x = adjoint_masked(y, mask)
    trace = DampTrace()
    for t in range(iters):
        z = y - forward_masked(x, mask)
        r = x + adjoint_masked(z, mask)
        x = fn(r, schedule[t])
        if not np.all(np.isfinite(x)):
            raise SolverDiverged(f"non-finite iterate at iteration {t}", trace)
        _record(trace, schedule[t], z, 0.0, False, reference, x)
    return x, trace


def damp_reconstruct(y: np.ndarray, mask: SamplingMask,
                     kind: Union[DenoiserKind, Callable], iters: int,
                     warm_start: Optional[np.ndarray] = None, seed: int = 0,
                     probes: int = 1, sigma_floor: float = 0.0,
                     reference: Optional[np.ndarray] = None,
                     ) -> tuple[np.ndarray, DampTrace]:
    """Denoising-based approximate message passing.

    Per iteration: corrected residual z_t = y - F x_t + z_{t-1} * div/m
    (no correction at t = 0), back-projection r_t = x_t + F^H z_t, noise
    estimate sigma_t = ||z_t||_2 / sqrt(m), then x_{t+1} = D_sigma(r_t).
    The divergence is a seeded Monte-Carlo estimate; div/m is clamped to
    [-1, 1] and clamping is recorded in the trace.

    Starts from warm_start when given, else from x = 0 (so the first
    denoiser input r_0 is the zero-filled image at sigma ||y|| / sqrt(m)).
    A warm start that is exactly data-consistent yields z = 0 and would
    freeze the iteration; a positive sigma_floor keeps the denoiser
    active in that regime (the floor never raises a sigma estimate that
    already exceeds it).
    """
    if iters < 1:
        raise ValueError(f"iters must be >= 1, got {iters}")
    if sigma_floor < 0:
        raise ValueError(f"sigma_floor must be non-negative, got {sigma_floor}")
    fn = _as_denoise_fn(kind)
    y = np.asarray(y, dtype=np.complex128)
    m = mask.m
    if m == 0:
        raise ValueError("mask samples no points")

    if warm_start is not None:
        x = np.asarray(warm_start, dtype=np.complex128).copy()
    else:
        x = np.zeros_like(y)

    trace = DampTrace()
    z_prev = None
    onsager = 0.0
    clamped = False
    for t in range(iters):
        z = y - forward_masked(x, mask)
        if t > 0:
            z = z + z_prev * onsager
        r = x + adjoint_masked(z, mask)
        sigma = max(float(np.linalg.norm(z)) / np.sqrt(m), sigma_floor)
        x = fn(r, sigma)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
            raise SolverDiverged(f"non-finite iterate at iteration {t}", trace)

        if t < iters - 1:
            eps = max(float(np.max(np.abs(r))), 1.0) * 1e-3
            div = mc_divergence(kind, r, sigma, eps, probes,
                                seed=_iter_seed(seed, t), base=x)
            onsager = div / m
            clamped = abs(onsager) > ONSAGER_CLAMP
            if clamped:
                onsager = float(np.clip(onsager, -ONSAGER_CLAMP, ONSAGER_CLAMP))
        else:
            div = float("nan")  # never consumed
        _record(trace, sigma, z, div, clamped, reference, x)
        z_prev = z
    return x, trace


def _iter_seed(seed: int, t: int) -> int:
    return int(np.random.SeedSequence([seed & 0xFFFFFFFF, 101, t]).generate_state(1)[0])
