"""Experiment orchestration: resolve inputs, run a method, write artifacts.

Every experiment is reproducible from its spec and seed; the binary
outputs are the source of truth and the PNGs are derived views.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from csmri import io
from csmri.cascade import NetworkArch
from csmri.damp import damp_reconstruct, ista_reconstruct
from csmri.denoisers import (BLOCK_MATCH_3D_HT, DCT_HARD_THRESHOLD,
                             DenoiserKind)
from csmri.fourier import adjoint_masked, fft2c
from csmri.masks import MaskSpec, SamplingMask, generate_cartesian_mask
from csmri.metrics import MetricReport, psnr, ssim
from csmri.phantom import shepp_logan
from csmri.selfsup import (DAMP_DENOISER, ReconConfig, train_ss,
                           train_ss_red, write_history_csv)

METHODS = ("zf", "ista", "damp", "ss", "ss-bm3d", "ss-damp")


@dataclass
class ExperimentSpec:
    """Declarative description of one reconstruction run."""

    method: str
    out_dir: str
    phantom_size: Optional[tuple[int, int]] = None
    input_path: Optional[str] = None
    reference_path: Optional[str] = None
    mask_path: Optional[str] = None
    mask_spec: Optional[MaskSpec] = None
    acs_size: int = 20
    arch: NetworkArch = field(default_factory=NetworkArch)
    cfg: ReconConfig = field(default_factory=ReconConfig)
    ista_sigma_start: float = 0.15
    ista_sigma_end: float = 0.01
    error_gain: float = 5.0

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if (self.phantom_size is None) == (self.input_path is None):
            raise ValueError("exactly one of phantom_size/input_path is required")
        if (self.mask_path is None) == (self.mask_spec is None):
            raise ValueError("exactly one of mask_path/mask_spec is required")
        if self.method == "ss-bm3d":
            if not isinstance(self.cfg.denoiser, DenoiserKind):
                raise ValueError("ss-bm3d needs a plain denoiser kind")
            if self.cfg.sigma_fixed is None:
                raise ValueError("ss-bm3d requires sigma_fixed")
        if self.method == "ss-damp" and self.cfg.denoiser != DAMP_DENOISER:
            raise ValueError("ss-damp requires denoiser 'd-amp'")


def parse_denoiser(name: str):
    """Map a config string to a denoiser selection."""
    key = name.strip().lower()
    if key in (DAMP_DENOISER, "damp"):
        return DAMP_DENOISER
    if key in (DCT_HARD_THRESHOLD, "dct"):
        return DenoiserKind(variant=DCT_HARD_THRESHOLD)
    if key in (BLOCK_MATCH_3D_HT, "bm3d"):
        return DenoiserKind(variant=BLOCK_MATCH_3D_HT)
    raise ValueError(f"unknown denoiser {name!r}")


def _resolve_inputs(spec: ExperimentSpec):
    if spec.phantom_size is not None:
        reference = shepp_logan(*spec.phantom_size)
        full_k = fft2c(reference)
    else:
        data = io.load_complex(spec.input_path)
        header = Path(spec.input_path).read_bytes()[:8]
        if header == io.MAGIC_IMAGE:
            reference = data
            full_k = fft2c(data)
        else:
            full_k = data
            reference = None
    if spec.reference_path is not None:
        reference = io.load_complex(spec.reference_path, domain="image")

    if spec.mask_path is not None:
        sampled = io.load_mask(spec.mask_path)
        acs = (min(spec.acs_size, sampled.shape[0]),
               min(spec.acs_size, sampled.shape[1]))
        mask = SamplingMask(sampled, acs=acs)
    else:
        mask = generate_cartesian_mask(spec.mask_spec)
    if mask.shape != full_k.shape:
        raise ValueError(
            f"mask shape {mask.shape} does not match data shape {full_k.shape}")
    y = np.where(mask.sampled, full_k, 0)
    return reference, y, mask


def _geometric_schedule(start: float, end: float, n: int) -> list[float]:
    if n == 1:
        return [start]
    ratio = (end / start) ** (1.0 / (n - 1))
    return [start * ratio ** i for i in range(n)]


def _reconstruct(spec: ExperimentSpec, y, mask, reference):
    cfg = spec.cfg
    history = None
    trace = None
    if spec.method == "zf":
        out = adjoint_masked(y, mask)
    elif spec.method == "ista":
        schedule = _geometric_schedule(spec.ista_sigma_start,
                                       spec.ista_sigma_end, cfg.cs_iters)
        out, trace = ista_reconstruct(y, mask, cfg.damp_denoiser, schedule,
                                      cfg.cs_iters, reference=reference)
    elif spec.method == "damp":
        out, trace = damp_reconstruct(y, mask, cfg.damp_denoiser,
                                      iters=cfg.cs_iters, seed=cfg.seed,
                                      reference=reference)
    elif spec.method == "ss":
        out, history = train_ss(y, mask, spec.arch, cfg, reference=reference)
    else:  # ss-bm3d / ss-damp
        out, history = train_ss_red(y, mask, spec.arch, cfg,
                                    reference=reference)
    return out, history, trace


def _write_trace_csv(path, trace) -> None:
    cols = ["iteration", "sigma_hat", "residual_norm", "divergence",
            "onsager_clamped"]
    has_psnr = bool(trace.psnr_db)
    if has_psnr:
        cols.append("psnr")
    with open(path, "w", encoding="utf-8") as f:
        f.write(",".join(cols) + "\n")
        for i in range(trace.iterations):
            row = [str(i), repr(trace.sigma_hat[i]), repr(trace.residual_norm[i]),
                   repr(trace.divergence[i]), str(int(trace.onsager_clamped[i]))]
            if has_psnr:
                row.append(repr(trace.psnr_db[i]))
            f.write(",".join(row) + "\n")


def run_experiment(spec: ExperimentSpec) -> MetricReport:
    """Run one reconstruction and write recon binary/PNG, error map,
    history CSV and metrics JSON into spec.out_dir."""
    spec.validate()
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    t0 = time.perf_counter()
    reference, y, mask = _resolve_inputs(spec)
    out, history, trace = _reconstruct(spec, y, mask, reference)
    wall = time.perf_counter() - t0

    io.save_complex(out_dir / "recon.csim", out, domain="image")
    io.magnitude_png(out_dir / "recon.png", out)
    if history is not None:
        write_history_csv(out_dir / "history.csv", history)
    if trace is not None:
        _write_trace_csv(out_dir / "trace.csv", trace)

    psnr_db = ssim_val = None
    if reference is not None:
        peak = float(np.max(np.abs(reference)))
        err = np.abs(reference - out) / peak if peak > 0 else np.abs(out)
        io.write_gray_png(out_dir / "error.png", err * spec.error_gain)
        psnr_db = psnr(reference, out)
        ssim_val = ssim(reference, out)

    report = MetricReport(
        psnr_db=math.inf if psnr_db == math.inf else psnr_db,
        ssim=ssim_val,
        method=spec.method,
        reduction=spec.mask_spec.reduction if spec.mask_spec else None,
        seed=spec.cfg.seed,
        wall_seconds=wall,
    )
    _write_metrics_json(out_dir / "metrics.json", report)
    return report


def _write_metrics_json(path, report: MetricReport) -> None:
    infinite = report.psnr_db is not None and math.isinf(report.psnr_db)
    payload = {
        "method": report.method,
        "reduction": report.reduction,
        "seed": report.seed,
        "psnr_db": None if (report.psnr_db is None or infinite) else report.psnr_db,
        "psnr_infinite": infinite,
        "ssim": report.ssim,
        "wall_seconds": report.wall_seconds,
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                          encoding="utf-8")


def aggregate_reports(paths, out_csv) -> None:
    """Collect metrics JSONs into a results-table CSV: one row per
    method, psnr/ssim columns per reduction factor (means over files)."""
    cells: dict[tuple[str, float], list[tuple[float, float]]] = {}
    for p in paths:
        data = json.loads(Path(p).read_text(encoding="utf-8"))
        if data.get("reduction") is None:
            continue
        key = (data["method"], float(data["reduction"]))
        cells.setdefault(key, []).append(
            (data["psnr_db"] if not data["psnr_infinite"] else math.inf,
             data["ssim"]))

    methods = sorted({k[0] for k in cells})
    rs = sorted({k[1] for k in cells})
    with open(out_csv, "w", encoding="utf-8") as f:
        head = ["method"]
        for r in rs:
            tag = f"{r:g}"
            head += [f"psnr_R{tag}", f"ssim_R{tag}"]
        f.write(",".join(head) + "\n")
        for m in methods:
            row = [m]
            for r in rs:
                entries = cells.get((m, r))
                if not entries:
                    row += ["", ""]
                    continue
                psnrs = [e[0] for e in entries if e[0] is not None]
                ssims = [e[1] for e in entries if e[1] is not None]
                row.append(f"{np.mean(psnrs):.2f}" if psnrs else "")
                row.append(f"{np.mean(ssims):.4f}" if ssims else "")
            f.write(",".join(row) + "\n")


def load_config_file(path) -> dict[str, dict[str, str]]:
    """INI config ([mask]/[train]/[red] sections, key = value)."""
    import configparser

    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise FileNotFoundError(f"config file not found: {path}")
    return {section: dict(parser[section]) for section in parser.sections()}


# config keys, their target and caster; CLI flags override file values
_MASK_KEYS = {
    "height": int, "width": int, "reduction": float, "acs": int,
    "density_decay": float, "seed": int,
}
_TRAIN_KEYS = {
    "cnn_cascades": int, "conv_layers": int, "channels": int, "kernel": int,
    "ss_epochs": int, "lr": float, "seed": int, "eval_every": int,
    "dc_subset": str, "job_mode": str, "split_by_lines": lambda s: s in ("1", "true", "yes"),
}
_RED_KEYS = {
    "lambda": float, "mu": float, "eta": float, "cs_iters": int,
    "cs_interval": int, "launch_epoch": int, "sigma": float,
    "denoiser": str, "sigma_start": float, "sigma_end": float,
}


def merge_settings(file_cfg: dict, overrides: dict) -> dict:
    """Flatten [mask]/[train]/[red] file settings, casting values, then
    apply non-None CLI overrides on top."""
    out: dict[str, object] = {}
    for section, keys in (("mask", _MASK_KEYS), ("train", _TRAIN_KEYS),
                          ("red", _RED_KEYS)):
        present = file_cfg.get(section, {})
        for key, value in present.items():
            if key not in keys:
                raise ValueError(f"unknown config key [{section}] {key}")
            name = key if section != "mask" else f"mask_{key}"
            out[name] = keys[key](value)
    for key, value in overrides.items():
        if value is not None:
            out[key] = value
    return out


def build_spec(method: str, out_dir: str, settings: dict,
               phantom_size=None, input_path=None, reference_path=None,
               mask_path=None) -> ExperimentSpec:
    """Assemble an ExperimentSpec from merged settings."""
    s = dict(settings)

    arch = NetworkArch(
        cascades=s.pop("cnn_cascades", 7),
        conv_layers=s.pop("conv_layers", 5),
        channels=s.pop("channels", 64),
        kernel=s.pop("kernel", 3),
    )

    denoiser = s.pop("denoiser", None)
    if denoiser is None:
        denoiser = {"ss-bm3d": "bm3d", "ss-damp": DAMP_DENOISER}.get(method, "bm3d")
    denoiser = parse_denoiser(denoiser) if isinstance(denoiser, str) else denoiser
    damp_kind = denoiser if isinstance(denoiser, DenoiserKind) else DenoiserKind()
    if method in ("ista", "damp") and isinstance(denoiser, str):
        damp_kind = DenoiserKind()

    default_iters = {"damp": 30, "ss-bm3d": 1}.get(method, 25)
    cfg = ReconConfig(
        lam=s.pop("lambda", 0.0),
        mu=s.pop("mu", 0.0),
        eta=s.pop("eta", 0.0),
        cs_iters=s.pop("cs_iters", default_iters),
        cs_interval=s.pop("cs_interval", 1000),
        ss_epochs=s.pop("ss_epochs", 500),
        learning_rate=s.pop("lr", 1e-3),
        denoiser_launch_epoch=s.pop("launch_epoch", 0),
        denoiser=DAMP_DENOISER if method == "ss-damp" else denoiser,
        damp_denoiser=damp_kind,
        sigma_fixed=s.pop("sigma", None),
        seed=s.pop("seed", 0),
        split_by_lines=s.pop("split_by_lines", False),
        dc_subset=s.pop("dc_subset", "subset"),
        job_mode=s.pop("job_mode", "thread"),
        eval_every=s.pop("eval_every", 1),
    )

    mask_kw = {k[len("mask_"):]: s.pop(k)
               for k in [k for k in s if k.startswith("mask_")]}
    mask_spec = None
    acs_size = mask_kw.get("acs", 20)
    if mask_path is None:
        if phantom_size is not None:
            h, w = phantom_size
        else:
            h, w = mask_kw.get("height"), mask_kw.get("width")
            if h is None or w is None:
                raise ValueError("mask height/width needed when loading "
                                 "k-space without a mask file")
        mask_spec = MaskSpec(
            height=h, width=w,
            reduction=mask_kw.get("reduction", 4.0),
            acs_size=acs_size,
            density_decay=mask_kw.get("density_decay", 1.0),
            seed=mask_kw.get("seed", 0),
        )

    spec = ExperimentSpec(
        method=method,
        out_dir=out_dir,
        phantom_size=phantom_size,
        input_path=input_path,
        reference_path=reference_path,
        mask_path=mask_path,
        mask_spec=mask_spec,
        acs_size=acs_size,
        arch=arch,
        cfg=cfg,
        ista_sigma_start=s.pop("sigma_start", 0.15),
        ista_sigma_end=s.pop("sigma_end", 0.01),
    )
    if s:
        raise ValueError(f"unused settings: {sorted(s)}")
    return spec
