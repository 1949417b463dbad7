"""Command line entry point: ``ridge-unlearn <subcommand> --config cfg.toml``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import pipeline
from .config import ConfigError, ExperimentConfig
from .errors import DomainError, NumericalError


def _experiment_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out_dir is not None:
        overrides["out_dir"] = args.out_dir
    if args.append_bias:
        overrides["append_bias"] = True
    if args.baseline is not None:
        if args.C is None:
            raise ConfigError("--baseline uniform needs --C")
        overrides["baseline_C"] = args.C
    return dataclasses.replace(cfg, **overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ridge-unlearn",
        description="Per-instance certified unlearning for ridge regression.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def experiment(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="TOML config or a previous report.json")
        p.add_argument("--seed", type=int)
        p.add_argument("--out-dir")
        p.add_argument("--append-bias", action="store_true")
        p.add_argument("--baseline", choices=["uniform"])
        p.add_argument("--C", type=float, help="global gradient-norm bound for the uniform baseline")
        return p

    experiment("calibrate", "per-point unlearning noise (analytic, no simulation)")
    unlearn = experiment("unlearn", "learn, calibrate and unlearn one point")
    unlearn.add_argument("--point", type=int, required=True)
    experiment("sensitivity-map", "high-probability sensitivity bounds for all points")
    experiment("sweep", "privacy-utility and K-ablation sweeps")
    experiment("loo-check", "Sherman-Morrison LOO predictions vs retraining")

    audit = sub.add_parser("audit", help="empirical audit of two run-representation sets")
    audit.add_argument("--p", required=True, help="unlearned-run CSV, or a labeled CSV if --q is omitted")
    audit.add_argument("--q", help="retrained-run CSV")
    audit.add_argument("--label-column", type=int, default=0)
    audit.add_argument("--delta", type=float, required=True)
    audit.add_argument("--grid-size", type=int, default=1000)
    audit.add_argument("--seed", type=int, default=0)
    audit.add_argument("--out-dir", default="out")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "audit":
            cfg = pipeline.AuditConfig(
                args.p, args.q, args.delta, args.grid_size, args.seed, args.out_dir,
                args.label_column,
            )
            report = pipeline.cmd_audit(cfg)
        else:
            cfg = _experiment_config(args)
            if args.command == "calibrate":
                report = pipeline.cmd_calibrate(cfg)
            elif args.command == "unlearn":
                report = pipeline.cmd_unlearn(cfg, args.point)
            elif args.command == "sensitivity-map":
                report = pipeline.cmd_sensitivity_map(cfg)
            elif args.command == "sweep":
                report = pipeline.cmd_sweep(cfg)
            else:
                report = pipeline.cmd_loo_check(cfg)
    except (DomainError, NumericalError, IndexError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    summary = {k: v for k, v in report.items() if k not in ("config", "records")}
    summary["records"] = len(report["records"])
    print(json.dumps(summary, sort_keys=True, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
