"""Command-line entry point: ``mlo-bench run|summarize|mse-curve``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, load_config
from .runner import ResultBundle, emit_mse_curve, run_experiment


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.output_dir:
        cfg = replace(cfg, output_dir=args.output_dir)
    if args.workers is not None:
        cfg = replace(cfg, workers=args.workers)
    bundle = run_experiment(cfg)
    print(f"wrote {cfg.output_dir}")
    for err in bundle.errors:
        print(f"arm {err['arm']} (r={err['r']}) replication {err['replication']} failed: {err['error']}",
              file=sys.stderr)
    return 0


def _cmd_summarize(args) -> int:
    bundle = ResultBundle.load(args.bundle_dir)
    print(f"{bundle.name}: n={bundle.n}")
    header = f"{'arm':<14}{'r':>7}  {'parameter':<12}{'bias x1e3':>12}{'sd x1e3':>12}{'mse x1e3':>12}{'frac %':>9}"
    print(header)
    for a in bundle.arms:
        r = "" if a.r is None else str(a.r)
        frac = 100.0 * a.mean_fraction
        if a.report is None:
            print(f"{a.arm:<14}{r:>7}  {'-':<12}{'':>12}{'':>12}{'':>12}{frac:>9.3f}")
            continue
        for j, name in enumerate(bundle.param_names):
            print(f"{a.arm:<14}{r:>7}  {name:<12}{1e3 * a.report.bias[j]:>12.3f}"
                  f"{1e3 * a.report.sd[j]:>12.3f}{1e3 * a.report.mse[j]:>12.3f}{frac:>9.3f}")
    return 0


def _cmd_mse_curve(args) -> int:
    bundle = ResultBundle.load(args.bundle_dir)
    out = args.output or Path(args.bundle_dir) / "mse_curve.csv"
    emit_mse_curve(bundle, out)
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mlo-bench", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("config")
    p.add_argument("--output-dir")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("summarize", help="print the replication report of a bundle")
    p.add_argument("bundle_dir")
    p.set_defaults(func=_cmd_summarize)

    p = sub.add_parser("mse-curve", help="write arm,r,mse_sum CSV for plotting")
    p.add_argument("bundle_dir")
    p.add_argument("-o", "--output")
    p.set_defaults(func=_cmd_mse_curve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
