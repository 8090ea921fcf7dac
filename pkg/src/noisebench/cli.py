"""Command-line interface.

Subcommands:
  corrupt    generate a corrupted benchmark tree from a manifest
  evaluate   score a predictions file against a sigma summary
  stratify   pooled sigma-stratified calibration error across tiers
  params     print a tier's noise parameters

Exit codes: 0 success, 1 data or runtime failure, 2 usage error.
"""

import argparse
import sys
from pathlib import Path

from . import metrics, pipeline
from .errors import NoiseBenchError


def _parse_sensor(text):
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected x,y,z got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad sensor coordinate in {text!r}") from None


def build_parser():
    parser = argparse.ArgumentParser(
        prog="noisebench",
        description="Point cloud corruption benchmark and calibration scoring.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("corrupt", help="corrupt a manifest of clean clouds")
    p.add_argument("manifest", help="manifest CSV (sample_id,label,path)")
    p.add_argument("tier", help="preset tier name or path to a key=value "
                                "tier config file")
    p.add_argument("out_dir", help="output root; files go to out_dir/<tier>/")
    p.add_argument("--seed", type=int, default=None,
                   help="global seed (default 0, or the config file's)")
    p.add_argument("--normal-k", type=int, default=None,
                   help="normal estimation neighborhood size (default 16)")
    p.add_argument("--sensor", type=_parse_sensor, default=None, metavar="X,Y,Z",
                   help="sensor position (default 0,-2,0)")
    p.add_argument("--scale", type=float, default=None,
                   help="uniform coordinate scale applied before corruption")
    p.add_argument("--threads", type=int, default=None,
                   help="worker cap (default: available parallelism)")
    p.add_argument("--keep-going", action="store_true",
                   help="continue past failing samples and report them")

    p = sub.add_parser("evaluate", help="score predictions against a sigma summary")
    p.add_argument("predictions", help="predictions CSV")
    p.add_argument("sigma_summary", help="sigma summary CSV from corrupt")
    p.add_argument("--bins", type=int, default=metrics.DEFAULT_BINS,
                   help="calibration bin count (default %(default)s)")
    p.add_argument("--out", default=None, metavar="DIR",
                   help="write report.txt and curve.csv to DIR")

    p = sub.add_parser("stratify", help="sigma-stratified ECE pooled over tiers")
    p.add_argument("--preds", nargs="+", required=True, metavar="CSV",
                   help="prediction CSVs, one per tier")
    p.add_argument("--sigmas", nargs="+", required=True, metavar="CSV",
                   help="sigma summary CSVs, matching --preds order")
    p.add_argument("--quartiles", type=int, default=metrics.DEFAULT_QUARTILES,
                   help="number of rank groups (default %(default)s)")
    p.add_argument("--bins", type=int, default=metrics.DEFAULT_BINS,
                   help="calibration bin count (default %(default)s)")
    p.add_argument("--out", default=None, metavar="DIR",
                   help="write stratified.csv to DIR")

    p = sub.add_parser("params", help="print a preset tier's parameters")
    p.add_argument("tier", help="tier name: " + ", ".join(pipeline.TIER_NAMES))

    return parser


def _resolve_tier(args):
    """Preset name, or a config file path when the name matches no preset."""
    if args.tier in pipeline.TIER_NAMES:
        config = pipeline.preset_config(args.tier)
    elif Path(args.tier).is_file():
        config = pipeline.read_tier_config(args.tier)
    else:
        return None
    if args.seed is not None:
        config.global_seed = args.seed
    if args.normal_k is not None:
        config.normal_k = args.normal_k
    if args.sensor is not None:
        config.sensor = args.sensor
    return config


def _cmd_corrupt(args):
    config = _resolve_tier(args)
    if config is None:
        print(f"error: {args.tier!r} is neither a preset tier "
              f"({', '.join(pipeline.TIER_NAMES)}) nor a config file",
              file=sys.stderr)
        return 2
    manifest = pipeline.read_manifest(args.manifest)
    summary = pipeline.generate_benchmark(
        manifest, config, args.out_dir, threads=args.threads,
        keep_going=args.keep_going, scale=args.scale,
    )
    print(f"tier={summary.tier} samples={summary.sample_count} "
          f"failures={summary.failure_count} mean_sigma={summary.mean_sigma!r}")
    print(f"wrote {summary.out_dir / summary.tier}")
    for sid, msg in summary.failures:
        print(f"failed {sid}: {msg}", file=sys.stderr)
    return 1 if summary.failures else 0


def _cmd_evaluate(args):
    records = metrics.read_predictions(args.predictions)
    sigma_by_id = metrics.read_sigma_summary(args.sigma_summary)
    report = metrics.evaluate(records, sigma_by_id, bins=args.bins)
    if report.pearson_r is None:
        pearson_text = "undefined(zero_variance)"
    else:
        pearson_text = repr(report.pearson_r)
    print(f"accuracy={report.accuracy!r}")
    print(f"ece={report.ece!r}")
    print(f"pearson_r={pearson_text}")
    print(f"n={report.n}")
    print(f"bins={report.bin_count}")
    if args.out:
        metrics.write_report(args.out, report)
        print(f"wrote {Path(args.out) / 'report.txt'}")
    return 0


def _cmd_stratify(args):
    if len(args.preds) != len(args.sigmas):
        print("error: --preds and --sigmas must list the same number of files",
              file=sys.stderr)
        return 2
    tier_sets = []
    for pred_path, sigma_path in zip(args.preds, args.sigmas):
        tier_sets.append((metrics.read_predictions(pred_path),
                          metrics.read_sigma_summary(sigma_path)))
    rows = metrics.stratified_ece(tier_sets, quartiles=args.quartiles,
                                  bins=args.bins)
    print("pooled=" + ",".join(args.preds))
    for q in rows:
        print(f"quartile={q.quartile} sigma_lo={q.sigma_lo!r} "
              f"sigma_hi={q.sigma_hi!r} count={q.count} ece={q.ece!r}")
        if q.sigma_lo == q.sigma_hi:
            print(f"warning: quartile {q.quartile} has a degenerate sigma range",
                  file=sys.stderr)
    if args.out:
        metrics.write_stratified(Path(args.out) / "stratified.csv", rows)
        print(f"wrote {Path(args.out) / 'stratified.csv'}")
    return 0


def _cmd_params(args):
    try:
        params = pipeline.tier_params(args.tier)
    except NoiseBenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for key in ("a", "b", "c", "k", "p_out"):
        print(f"{key}={getattr(params, key)!r}")
    return 0


_HANDLERS = {
    "corrupt": _cmd_corrupt,
    "evaluate": _cmd_evaluate,
    "stratify": _cmd_stratify,
    "params": _cmd_params,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help
        return int(exc.code or 0)
    try:
        return _HANDLERS[args.command](args)
    except NoiseBenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
