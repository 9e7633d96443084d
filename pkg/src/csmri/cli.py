"""Command-line interface.

Subcommands: `mask gen`, `phantom`, `recon`, `metrics`, `report`.
Config files (INI, sections [mask]/[train]/[red]) seed the settings and
CLI flags override them; CSMRI_THREADS caps internal parallelism.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from csmri import experiment, io
from csmri.masks import MaskSpec, generate_cartesian_mask
from csmri.metrics import psnr, ssim
from csmri.phantom import shepp_logan


def _add_mask_gen(sub):
    p = sub.add_parser("gen", help="generate a Cartesian line mask")
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--reduction", "-R", type=float, required=True)
    p.add_argument("--acs", type=int, default=20)
    p.add_argument("--density-decay", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--png", help="optional preview image")
    p.set_defaults(run=_run_mask_gen)


def _run_mask_gen(args) -> int:
    spec = MaskSpec(height=args.height, width=args.width,
                    reduction=args.reduction, acs_size=args.acs,
                    density_decay=args.density_decay, seed=args.seed)
    mask = generate_cartesian_mask(spec)
    io.save_mask(args.out, mask.sampled)
    if args.png:
        io.write_gray_png(args.png, mask.sampled.astype(float))
    print(f"wrote {args.out}: {mask.m}/{mask.sampled.size} samples "
          f"({mask.sampled.size / mask.m:.2f}x)")
    return 0


def _run_phantom(args) -> int:
    img = shepp_logan(args.size, args.size)
    io.save_complex(args.out, img, domain="image")
    if args.png:
        io.magnitude_png(args.png, img)
    print(f"wrote {args.out}: {args.size}x{args.size} phantom")
    return 0


def _run_recon(args) -> int:
    file_cfg = experiment.load_config_file(args.config) if args.config else {}
    overrides = {
        "cnn_cascades": args.cascades, "conv_layers": args.conv_layers,
        "channels": args.channels, "ss_epochs": args.epochs, "lr": args.lr,
        "seed": args.seed, "eval_every": args.eval_every,
        "dc_subset": args.dc_subset, "job_mode": args.job_mode,
        "lambda": args.lam, "mu": args.mu, "eta": args.eta,
        "cs_iters": args.cs_iters, "cs_interval": args.cs_interval,
        "launch_epoch": args.launch_epoch, "sigma": args.sigma,
        "denoiser": args.denoiser, "sigma_start": args.sigma_start,
        "sigma_end": args.sigma_end,
        "mask_reduction": args.reduction, "mask_acs": args.acs,
        "mask_density_decay": args.density_decay, "mask_seed": args.mask_seed,
    }
    settings = experiment.merge_settings(file_cfg, overrides)
    phantom_size = (args.phantom, args.phantom) if args.phantom else None
    spec = experiment.build_spec(
        args.method, args.out_dir, settings, phantom_size=phantom_size,
        input_path=args.input, reference_path=args.reference,
        mask_path=args.mask)
    report = experiment.run_experiment(spec)
    shown = "inf" if (report.psnr_db is not None and math.isinf(report.psnr_db)) \
        else (f"{report.psnr_db:.2f}" if report.psnr_db is not None else "n/a")
    ssim_shown = f"{report.ssim:.4f}" if report.ssim is not None else "n/a"
    print(f"{args.method}: psnr={shown} dB ssim={ssim_shown} "
          f"wall={report.wall_seconds:.1f}s -> {args.out_dir}")
    return 0


def _run_metrics(args) -> int:
    ref = io.load_complex(args.reference)
    tst = io.load_complex(args.test)
    p = psnr(ref, tst)
    payload = {
        "psnr_db": None if math.isinf(p) else p,
        "psnr_infinite": math.isinf(p),
        "ssim": ssim(ref, tst),
    }
    text = json.dumps(payload, sort_keys=True, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def _run_report(args) -> int:
    experiment.aggregate_reports(args.metrics, args.out)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="csmri",
        description="Single-image self-supervised CS-MRI reconstruction")
    sub = ap.add_subparsers(dest="command", required=True)

    mask = sub.add_parser("mask", help="sampling mask tools")
    _add_mask_gen(mask.add_subparsers(dest="mask_command", required=True))

    ph = sub.add_parser("phantom", help="write a Shepp-Logan phantom image")
    ph.add_argument("--size", type=int, default=128)
    ph.add_argument("--out", required=True)
    ph.add_argument("--png")
    ph.set_defaults(run=_run_phantom)

    rc = sub.add_parser("recon", help="run a reconstruction experiment")
    rc.add_argument("--method", required=True, choices=experiment.METHODS)
    rc.add_argument("--out-dir", required=True)
    src = rc.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="CSIM image or CSKS k-space file")
    src.add_argument("--phantom", type=int, metavar="N",
                     help="use an NxN Shepp-Logan phantom as ground truth")
    rc.add_argument("--reference", help="CSIM ground truth for metrics")
    rc.add_argument("--mask", help="CSMK mask file (else one is generated)")
    rc.add_argument("--config", help="INI config file")
    rc.add_argument("--reduction", "-R", type=float)
    rc.add_argument("--acs", type=int)
    rc.add_argument("--density-decay", type=float)
    rc.add_argument("--mask-seed", type=int)
    rc.add_argument("--cascades", type=int)
    rc.add_argument("--conv-layers", type=int)
    rc.add_argument("--channels", type=int)
    rc.add_argument("--epochs", type=int)
    rc.add_argument("--lr", type=float)
    rc.add_argument("--seed", type=int)
    rc.add_argument("--eval-every", type=int)
    rc.add_argument("--dc-subset", choices=("subset", "omega"))
    rc.add_argument("--job-mode", choices=("thread", "inline"))
    rc.add_argument("--lambda", dest="lam", type=float)
    rc.add_argument("--mu", type=float)
    rc.add_argument("--eta", type=float)
    rc.add_argument("--cs-iters", type=int)
    rc.add_argument("--cs-interval", type=int)
    rc.add_argument("--launch-epoch", type=int)
    rc.add_argument("--sigma", type=float)
    rc.add_argument("--denoiser",
                    choices=("d-amp", "bm3d", "dct", "block_match_3d_ht",
                             "dct_hard_threshold"))
    rc.add_argument("--sigma-start", type=float)
    rc.add_argument("--sigma-end", type=float)
    rc.set_defaults(run=_run_recon)

    mt = sub.add_parser("metrics", help="PSNR/SSIM between two images")
    mt.add_argument("--reference", required=True)
    mt.add_argument("--test", required=True)
    mt.add_argument("--out")
    mt.set_defaults(run=_run_metrics)

    rp = sub.add_parser("report", help="aggregate metrics JSONs into a CSV")
    rp.add_argument("metrics", nargs="+")
    rp.add_argument("--out", required=True)
    rp.set_defaults(run=_run_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.run(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
