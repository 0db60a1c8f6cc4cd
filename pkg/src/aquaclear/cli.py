"""Command-line front end.

Subcommands: degrade (build synthetic pairs), train, enhance, benchmark,
metrics. Exit codes are a stable contract: 0 success, 1 I/O or file-format
failure, 2 usage or configuration error, 3 numeric divergence.
"""

from __future__ import annotations

import argparse
import math
import os
import statistics
import sys
import time
from dataclasses import replace
from pathlib import Path

from .baselines import clahe, hist_equalize, ssr
from .config import PipelineConfig, load_config
from .dataset import PatchSampler, load_manifest, load_training_pairs, make_pairs
from .errors import (
    ConfigError,
    DivergenceError,
    FormatError,
    NumericError,
    ParameterError,
    ShapeError,
)
from .image import ImageF, load_image, resize_bicubic, save_image, to_float, to_u8
from .metrics import CSV_HEADER, csv_row, evaluate_pair
from .retinex import msr_enhance
from .srcnn import load_model, save_model, super_resolve, train

_METHODS = ("input", "he", "clahe", "ssr", "msr", "proposed")
_SUMMARY_HEADER = ("method", "psnr_db", "ssim", "colorfulness", "seconds")


def worker_cap() -> int:
    """Worker ceiling from AQUACLEAR_THREADS; processing is currently serial."""
    raw = os.environ.get("AQUACLEAR_THREADS")
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"AQUACLEAR_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"AQUACLEAR_THREADS must be >= 1, got {n}")
    return n


def _pipeline_config(args) -> PipelineConfig:
    return load_config(args.config) if args.config else PipelineConfig()


def _enhance_full(model, img: ImageF, scale: int, cfg: PipelineConfig) -> ImageF:
    """The proposed pipeline: super-resolve, then retinex enhancement.

    The benchmark's "proposed" rows go through this exact function, so the
    reported numbers measure the same code the enhance command ships.
    """
    if cfg.msr_first:
        return super_resolve(model, msr_enhance(img, cfg.msr), scale)
    return msr_enhance(super_resolve(model, img, scale), cfg.msr)


def cmd_degrade(args) -> int:
    cfg = _pipeline_config(args).degrade
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    manifest = make_pairs(args.input, args.out, cfg)
    print(f"wrote {len(manifest.pairs)} pairs and manifest.json to {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = _pipeline_config(args).train
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.iterations is not None:
        cfg = replace(cfg, iterations=args.iterations)
    manifest = load_manifest(args.manifest)
    pairs = load_training_pairs(manifest)
    sampler = PatchSampler(pairs, cfg.patch_size, cfg.patch_stride)

    model, history = train(sampler, cfg, channels=3)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model_path = out / "model.srcnn"
    save_model(model, model_path)
    lines = ["iteration,loss"]
    lines += [f"{i + 1},{loss:.10g}" for i, loss in enumerate(history)]
    (out / "loss_history.csv").write_text("\n".join(lines) + "\n", encoding="ascii")
    print(f"saved {model_path}")
    if history:
        print(f"final loss: {history[-1]:.8g}")
    else:
        print("final loss: n/a (0 iterations)")
    return 0


def _require_model(args, cfg: PipelineConfig, what: str):
    path = Path(args.model) if args.model else cfg.model_path
    if path is None:
        raise ConfigError(f"{what} requires a model: pass --model or set \"model\" in the config")
    return load_model(path)


def cmd_enhance(args) -> int:
    cfg = _pipeline_config(args)
    if args.msr_first:
        cfg = replace(cfg, msr_first=True)
    mode = args.mode or cfg.mode
    scale = args.scale if args.scale is not None else cfg.scale_factor
    img = to_float(load_image(args.input))
    if mode == "msr_only":
        out_img = msr_enhance(img, cfg.msr)
    else:
        model = _require_model(args, cfg, f"mode {mode}")
        if mode == "srcnn_only":
            out_img = super_resolve(model, img, scale)
        else:
            out_img = _enhance_full(model, img, scale, cfg)
    save_image(to_u8(out_img), args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_metrics(args) -> int:
    cfg = _pipeline_config(args)
    reference = to_float(load_image(args.reference))
    candidate = to_float(load_image(args.candidate))
    report = evaluate_pair(reference, candidate, cfg.ssim)
    print(CSV_HEADER)
    print(csv_row("pair", Path(args.candidate).name, report))
    return 0


def _timed(fn, reps: int):
    """Run fn `reps` times; returns (last result, median seconds)."""
    times = []
    result = None
    for _ in range(reps):
        start = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - start)
    return result, statistics.median(times)


def _fmt_cell(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.6f}"


def _markdown_table(rows: list[tuple[str, ...]]) -> str:
    table = [_SUMMARY_HEADER, *rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(_SUMMARY_HEADER))]

    def line(cells) -> str:
        return "| " + " | ".join(c.ljust(w) for c, w in zip(cells, widths)) + " |"

    rule = "|" + "|".join("-" * (w + 2) for w in widths) + "|"
    return "\n".join([line(_SUMMARY_HEADER), rule, *(line(r) for r in rows)]) + "\n"


def cmd_benchmark(args) -> int:
    cfg = _pipeline_config(args)
    if args.reps < 1:
        raise ConfigError(f"--reps must be >= 1, got {args.reps}")
    methods = []
    for name in args.methods.split(","):
        name = name.strip()
        if name not in _METHODS:
            raise ConfigError(f"unknown method {name!r}, choose from {', '.join(_METHODS)}")
        if name not in methods:
            methods.append(name)
    if not methods:
        raise ConfigError("no methods requested")

    manifest = load_manifest(args.manifest)
    factor = manifest.config.downsample_factor
    model = _require_model(args, cfg, "method 'proposed'") if "proposed" in methods else None

    per_image = [CSV_HEADER]
    sums: dict[str, list[float]] = {m: [0.0, 0.0, 0.0, 0.0, 0] for m in methods}
    failures: list[str] = []
    for gt_path, lr_path in manifest.pairs:
        name = gt_path.stem.removesuffix("_gt")
        gt = to_float(load_image(gt_path))
        lr = to_float(load_image(lr_path))
        upscaled = resize_bicubic(lr, gt.height, gt.width)
        runners = {
            "input": lambda: upscaled,
            "he": lambda: hist_equalize(upscaled),
            "clahe": lambda: clahe(upscaled, cfg.clahe),
            "ssr": lambda: ssr(upscaled),
            "msr": lambda: msr_enhance(upscaled, cfg.msr),
            "proposed": lambda: _enhance_full(model, lr, factor, cfg),
        }
        for method in methods:
            try:
                candidate, seconds = _timed(runners[method], args.reps)
                report = evaluate_pair(gt, candidate, cfg.ssim, elapsed_seconds=seconds)
            except (ParameterError, ShapeError, NumericError, FormatError, OSError) as exc:
                failures.append(f"{method} on {name}: {exc}")
                continue
            per_image.append(csv_row(method, name, report))
            acc = sums[method]
            acc[0] += report.psnr_db
            acc[1] += report.ssim
            acc[2] += report.colorfulness
            acc[3] += report.elapsed_seconds
            acc[4] += 1

    for line in failures:
        print(f"failed: {line}", file=sys.stderr)
    if len(per_image) == 1:
        print("error: every method failed on every image", file=sys.stderr)
        return 1

    summary_rows = []
    for method in methods:
        psnr_sum, ssim_sum, cm_sum, sec_sum, count = sums[method]
        if count == 0:
            continue
        summary_rows.append(
            (
                method,
                _fmt_cell(psnr_sum / count),
                _fmt_cell(ssim_sum / count),
                _fmt_cell(cm_sum / count),
                _fmt_cell(sec_sum / count),
            )
        )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "per_image.csv").write_text("\n".join(per_image) + "\n", encoding="ascii")
    summary_csv = [",".join(_SUMMARY_HEADER)]
    summary_csv += [",".join(row) for row in summary_rows]
    (out / "summary.csv").write_text("\n".join(summary_csv) + "\n", encoding="ascii")
    table = _markdown_table(summary_rows)
    (out / "summary.md").write_text(table, encoding="ascii")
    print(table, end="")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aquaclear",
        description="Underwater image enhancement: super-resolution plus retinex defogging.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("degrade", help="synthesize degraded/ground-truth training pairs")
    p.add_argument("--input", required=True, help="directory of source images (png/ppm/pgm)")
    p.add_argument("--out", required=True, help="output directory for pairs + manifest.json")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int, help="override degrade.seed")
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("train", help="train the super-resolution network on a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="directory for model.srcnn + loss_history.csv")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int, help="override train.seed")
    p.add_argument("--iterations", type=int, help="override train.iterations")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("enhance", help="enhance one image")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True, help="output image path (png/ppm/pgm)")
    p.add_argument("--model", help="model file (required for full and srcnn_only)")
    p.add_argument("--mode", choices=("full", "srcnn_only", "msr_only"))
    p.add_argument("--scale", type=int, help="upscale factor (default from config)")
    p.add_argument("--msr-first", action="store_true", dest="msr_first",
                   help="ablation: run retinex before the network")
    p.add_argument("--config", help="JSON config file")
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("benchmark", help="score methods over a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="directory for CSV/markdown reports")
    p.add_argument("--model", help="model file (required when methods include proposed)")
    p.add_argument("--methods", default=",".join(_METHODS),
                   help=f"comma-separated subset of: {', '.join(_METHODS)}")
    p.add_argument("--reps", type=int, default=3, help="timing repetitions per method (median)")
    p.add_argument("--config", help="JSON config file")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("metrics", help="PSNR/SSIM/colorfulness of a candidate vs a reference")
    p.add_argument("--reference", required=True)
    p.add_argument("--candidate", required=True)
    p.add_argument("--config", help="JSON config file")
    p.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse prints its own message; 2 on usage error
        return int(exc.code or 0)
    try:
        worker_cap()
        return args.func(args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, ParameterError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
