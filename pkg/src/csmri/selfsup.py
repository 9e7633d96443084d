"""Self-supervised training loops.

`train_ss` fits the cascade network to a single undersampled acquisition
by redrawing a random subset split every epoch and minimising the
held-out k-space mismatch. `train_ss_red` couples that loop to a chosen
denoiser through an ADMM splitting: a denoiser job runs on an immutable
snapshot of the current estimate (in parallel for the message-passing
solver, synchronously for plain denoisers), and at fixed epochs its
result is folded back in via the fixed-point update, after which the
training loss gains a pull toward the denoised estimate.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from csmri.cascade import (AdamState, NetworkArch, NetworkParams,
                           TrainingDiverged, adam_step, cascade_forward,
                           init_params, loss_and_grads, ss_loss)
from csmri.damp import damp_reconstruct
from csmri.denoisers import DenoiserKind, denoise
from csmri.fourier import adjoint_masked
from csmri.masks import SamplingMask, split_subsets
from csmri.metrics import psnr

log = logging.getLogger(__name__)

DAMP_DENOISER = "d-amp"

_SEED_INIT = 0
_SEED_SPLIT = 1
_SEED_JOB = 2
_SEED_SHADOW = 3

HISTORY_COLUMNS = ["epoch", "l_kdc", "l_cs", "sigma_hat", "psnr", "wall_ms"]


@dataclass(frozen=True)
class ReconConfig:
    """Hyperparameters of the self-supervised reconstruction."""

    lam: float = 0.0                 # denoiser-coupling weight
    mu: float = 0.0                  # ADMM quadratic weight
    eta: float = 0.0                 # multiplier step size
    cs_iters: int = 25               # denoiser iterations inside g(.)
    cs_interval: int = 1000          # epochs between incorporations
    ss_epochs: int = 500
    learning_rate: float = 1e-3
    denoiser_launch_epoch: int = 0
    denoiser: Union[DenoiserKind, str] = DAMP_DENOISER
    damp_denoiser: DenoiserKind = DenoiserKind()
    damp_sigma_floor: float = 0.01  # keeps warm-started jobs active
    sigma_fixed: Optional[float] = None
    seed: int = 0
    split_fraction: float = 0.5
    split_by_lines: bool = False
    dc_subset: str = "subset"        # DC data inside the net: "subset" | "omega"
    job_mode: str = "thread"         # "thread" | "inline"
    eval_every: int = 1

    def __post_init__(self):
        if min(self.lam, self.mu, self.eta) < 0:
            raise ValueError("lam, mu and eta must be non-negative")
        if self.cs_interval < 1 or self.cs_iters < 1 or self.ss_epochs < 1:
            raise ValueError("cs_interval, cs_iters and ss_epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0 < self.split_fraction < 1:
            raise ValueError("split_fraction must lie in (0, 1)")
        if self.dc_subset not in ("subset", "omega"):
            raise ValueError("dc_subset must be 'subset' or 'omega'")
        if self.job_mode not in ("thread", "inline"):
            raise ValueError("job_mode must be 'thread' or 'inline'")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")
        if not isinstance(self.denoiser, DenoiserKind) and self.denoiser != DAMP_DENOISER:
            raise ValueError("denoiser must be a DenoiserKind or 'd-amp'")


@dataclass
class TrainState:
    """Mutable loop state, owned by exactly one training loop."""

    epoch: int
    params: NetworkParams
    opt: AdamState
    x_k: Optional[np.ndarray]
    q_k: np.ndarray
    pending_job: object = None
    history: list = field(default_factory=list)


def red_update(x_hat: np.ndarray, g_out: np.ndarray, q_k: np.ndarray,
               lam: float, mu: float) -> np.ndarray:
    """Fixed-point solution of the denoiser-coupled quadratic:
    (lam * g_out + mu * (x_hat + q_k)) / (lam + mu)."""
    if lam + mu == 0:
        raise ValueError("lam + mu must be positive")
    return (lam * np.asarray(g_out) + mu * (np.asarray(x_hat) + q_k)) / (lam + mu)


def multiplier_update(q_k: np.ndarray, x_hat: np.ndarray, x_k: np.ndarray,
                      eta: float) -> np.ndarray:
    """Dual ascent on the splitting constraint: q + eta * (x_hat - x_k)."""
    if q_k.shape != x_hat.shape or q_k.shape != np.shape(x_k):
        raise ValueError("multiplier update shapes differ")
    return q_k + eta * (np.asarray(x_hat) - np.asarray(x_k))


def _derive_seed(seed: int, tag: int, epoch: int) -> int:
    ss = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, tag, epoch])
    return int(ss.generate_state(1)[0])


class _InlineFuture:
    """Job executed at submit time (strictly sequential mode)."""

    def __init__(self, fn, *args):
        try:
            self._value, self._error = fn(*args), None
        except Exception as exc:  # surfaced at result(), like a real future
            self._value, self._error = None, exc

    def result(self):
        if self._error is not None:
            raise self._error
        return self._value


def train_ss(y: np.ndarray, mask: SamplingMask, arch: NetworkArch,
             cfg: ReconConfig, reference: Optional[np.ndarray] = None,
             ) -> tuple[np.ndarray, list]:
    """Train on the self-supervised k-space loss alone.

    Returns the final reconstruction (input scale) and the per-epoch
    history. Deterministic given cfg.seed.
    """
    return _train_loop(y, mask, arch, cfg, reference, red_enabled=False)


def train_ss_red(y: np.ndarray, mask: SamplingMask, arch: NetworkArch,
                 cfg: ReconConfig, reference: Optional[np.ndarray] = None,
                 ) -> tuple[np.ndarray, list]:
    """Denoiser-regularised self-supervised training.

    With cfg.denoiser = 'd-amp' the message-passing job launches at
    cfg.denoiser_launch_epoch from a snapshot of the current full-mask
    estimate and is folded in cs_interval epochs later (then relaunched);
    a plain DenoiserKind is applied synchronously every cs_interval
    epochs starting at the launch epoch. Incorporation requires lam > 0;
    with lam = 0 the loop degenerates to train_ss exactly.
    """
    return _train_loop(y, mask, arch, cfg, reference,
                       red_enabled=cfg.lam > 0)


def _train_loop(y, mask, arch, cfg, reference, red_enabled):
    y = np.where(mask.sampled, np.asarray(y, dtype=np.complex128), 0)
    damp_mode = cfg.denoiser == DAMP_DENOISER
    if red_enabled and not damp_mode and cfg.sigma_fixed is None:
        raise ValueError("a plain denoiser needs sigma_fixed")

    zf = adjoint_masked(y, mask)
    peak = float(np.max(np.abs(zf)))
    scale = 1.0 / peak if peak > 0 else 1.0
    y_n = y * scale
    zf_n = zf * scale

    state = TrainState(
        epoch=0,
        params=init_params(arch, _derive_seed(cfg.seed, _SEED_INIT, 0)),
        opt=None,
        x_k=None,
        q_k=np.zeros_like(zf_n),
        history=[],
    )
    state.opt = AdamState.for_params(state.params)

    shadow = None
    if reference is None:
        shadow = split_subsets(mask, cfg.split_fraction, mask.acs[1],
                               _derive_seed(cfg.seed, _SEED_SHADOW, 0),
                               by_lines=cfg.split_by_lines)

    def eval_full(params):
        return cascade_forward(zf_n, y_n, mask, params)

    def submit(pool, snapshot, epoch):
        job_seed = _derive_seed(cfg.seed, _SEED_JOB, epoch)

        def job():
            img, trace = damp_reconstruct(
                y_n, mask, cfg.damp_denoiser, iters=cfg.cs_iters,
                warm_start=snapshot, seed=job_seed,
                sigma_floor=cfg.damp_sigma_floor)
            return img, trace.sigma_hat[-1]

        if pool is None:
            return _InlineFuture(job)
        return pool.submit(job)

    mu_active = False
    consume_at = None
    pool = None
    try:
        if red_enabled and damp_mode and cfg.job_mode == "thread":
            pool = ThreadPoolExecutor(max_workers=1)

        for epoch in range(cfg.ss_epochs):
            t0 = time.perf_counter()
            state.epoch = epoch
            sigma_row = None

            if red_enabled:
                sigma_row, mu_active, consume_at = _red_events(
                    state, cfg, epoch, damp_mode, eval_full, submit, pool,
                    mu_active, consume_at)

            seed_e = _derive_seed(cfg.seed, _SEED_SPLIT, epoch)
            pair = split_subsets(mask, cfg.split_fraction, mask.acs[1],
                                 seed_e, by_lines=cfg.split_by_lines)
            y_fit = np.where(pair.train.sampled, y_n, 0)
            y_loss = np.where(pair.loss.sampled, y_n, 0)
            zf_fit = adjoint_masked(y_fit, pair.train)
            if cfg.dc_subset == "omega":
                dc_y, dc_mask = y_n, mask
            else:
                dc_y, dc_mask = y_fit, pair.train

            mu_now = cfg.mu if mu_active else 0.0
            try:
                _, l_kdc, l_cs, grads, _ = loss_and_grads(
                    state.params, zf_fit, dc_y, dc_mask, y_loss, pair.loss,
                    state.x_k, state.q_k, mu_now)
                state.params, state.opt = adam_step(
                    state.params, state.opt, grads, lr=cfg.learning_rate)
            except TrainingDiverged as exc:
                raise TrainingDiverged(f"epoch {epoch}: {exc}",
                                       history=state.history) from exc

            row = {"epoch": epoch, "l_kdc": l_kdc, "l_cs": l_cs,
                   "sigma_hat": sigma_row, "psnr": None, "wall_ms": None,
                   "shadow_l_kdc": None}
            if epoch % cfg.eval_every == 0:
                out_n = eval_full(state.params)
                if reference is not None:
                    row["psnr"] = psnr(reference, out_n / scale)
                else:
                    row["shadow_l_kdc"] = ss_loss(
                        cascade_forward(
                            adjoint_masked(
                                np.where(shadow.train.sampled, y_n, 0),
                                shadow.train),
                            np.where(shadow.train.sampled, y_n, 0),
                            shadow.train, state.params),
                        np.where(shadow.loss.sampled, y_n, 0), shadow.loss)
            row["wall_ms"] = (time.perf_counter() - t0) * 1e3
            state.history.append(row)
    finally:
        if pool is not None:
            pool.shutdown(wait=False, cancel_futures=True)

    out = cascade_forward(zf_n, y_n, mask, state.params) / scale
    return out, state.history


def _red_events(state, cfg, epoch, damp_mode, eval_full, submit, pool,
                mu_active, consume_at):
    """Launch/consume denoiser jobs; returns (sigma_row, mu_active,
    consume_at). Runs before the epoch's gradient step, on the parameters
    as of this epoch."""
    sigma_row = None

    if damp_mode:
        if state.pending_job is None and epoch == cfg.denoiser_launch_epoch:
            state.pending_job = submit(pool, eval_full(state.params), epoch)
            consume_at = epoch + cfg.cs_interval
        elif state.pending_job is not None and epoch == consume_at:
            g_out = None
            try:
                g_out, sigma_row = state.pending_job.result()
            except Exception:
                log.warning("denoiser job failed at epoch %d; continuing "
                            "on the self-supervised loss alone", epoch,
                            exc_info=True)
            x_hat = eval_full(state.params)
            if g_out is not None:
                state.x_k = red_update(x_hat, g_out, state.q_k, cfg.lam, cfg.mu)
                state.q_k = multiplier_update(state.q_k, x_hat, state.x_k,
                                              cfg.eta)
                mu_active = cfg.mu > 0
            state.pending_job = submit(pool, x_hat, epoch)
            consume_at = epoch + cfg.cs_interval
    else:
        since = epoch - cfg.denoiser_launch_epoch
        if since >= 0 and since % cfg.cs_interval == 0:
            x_hat = eval_full(state.params)
            g_out = x_hat
            for _ in range(cfg.cs_iters):
                g_out = denoise(g_out, cfg.sigma_fixed, cfg.denoiser)
            state.x_k = red_update(x_hat, g_out, state.q_k, cfg.lam, cfg.mu)
            state.q_k = multiplier_update(state.q_k, x_hat, state.x_k, cfg.eta)
            mu_active = cfg.mu > 0

    return sigma_row, mu_active, consume_at


def write_history_csv(path, history: list) -> None:
    """Per-epoch history CSV; shadow_l_kdc is appended when present."""
    cols = list(HISTORY_COLUMNS)
    if any(row.get("shadow_l_kdc") is not None for row in history):
        cols.append("shadow_l_kdc")
    with open(path, "w", encoding="utf-8") as f:
        f.write(",".join(cols) + "\n")
        for row in history:
            f.write(",".join(_cell(row.get(c)) for c in cols) + "\n")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)
