"""Command-line entry point.

Exit codes: 0 success, 1 runtime or data failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .core import UABoostError
from .data import NoiseProfile, SyntheticSpec, generate_synthetic, write_synthetic_csv
from .experiment import (
    ExperimentConfig,
    calibration_curves_from_metrics,
    run_benchmark,
    write_calibration_tables,
    write_entropy_tables,
    write_report,
)

FLAG_KEYS = ("dataset", "learner", "mode", "folds", "repeats", "seed", "trees", "out", "group_by_subject",
             "mpiw_delta", "n_samples", "noise", "max_epochs", "n_jobs")


def _experiment_parser(sub, name, help):
    p = sub.add_parser(name, help=help)
    p.add_argument("--config", help="JSON file with the same keys as the flags (a report file also works)")
    p.add_argument("--dataset", help="'synthetic', 'parkinsons' or 'parkinsons:<path>'")
    p.add_argument("--learner", choices=["forest", "mlp"])
    p.add_argument("--mode", choices=["vanilla", "ua", "ua-weighted", "all"])
    p.add_argument("--folds", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--trees", type=int)
    p.add_argument("--out")
    p.add_argument("--group-by-subject", action="store_true", default=None)
    p.add_argument("--mpiw-delta", type=float)
    p.add_argument("--n-samples", type=int, help="synthetic dataset size")
    p.add_argument("--noise", choices=["homoscedastic", "heteroscedastic"])
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--n-jobs", type=int)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uaboost", description="Uncertainty-aware boosted multi-modal ensembles")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _experiment_parser(sub, "benchmark", "cross-validated RMSE / MPIW / PICP report")
    _experiment_parser(sub, "calibration", "calibration-curve tables")
    _experiment_parser(sub, "entropy", "predictive-entropy KDE tables")
    s = sub.add_parser("synth", help="write a synthetic multi-modal dataset")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--noise", choices=["homoscedastic", "heteroscedastic"], default="heteroscedastic")
    s.add_argument("--n-samples", type=int, default=2000)
    s.add_argument("--modalities", type=int, default=3)
    s.add_argument("--dim", type=int, default=8)
    s.add_argument("--sigma", type=float, default=0.5)
    s.add_argument("--out", default="synthetic")
    return parser


def resolve_config(args, parser) -> ExperimentConfig:
    values = {}
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            parser.error(f"cannot read config {args.config}: {exc}")
        values.update(loaded.get("config", loaded))
    for key in FLAG_KEYS:
        v = getattr(args, key)
        if v is not None:
            values[key] = v
    if args.repeats is not None and args.folds is None:
        values["folds"] = None
    elif args.folds is not None and args.repeats is None:
        values["repeats"] = None
    if values.get("dataset", "synthetic") == "synthetic" and "learner" not in values:
        values["learner"] = "mlp"
    try:
        return ExperimentConfig.from_dict(values)
    except (TypeError, ValueError) as exc:
        parser.error(str(exc))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    if args.command == "synth":
        try:
            prof = NoiseProfile(args.noise, args.sigma)
            spec = SyntheticSpec(args.n_samples, (args.dim,) * args.modalities, (prof,) * args.modalities,
                                 prof, seed=args.seed)
        except ValueError as exc:
            parser.error(str(exc))
        for p in write_synthetic_csv(generate_synthetic(spec), args.out):
            print(p)
        return 0

    cfg = resolve_config(args, parser)
    out = Path(cfg.out)
    try:
        result = run_benchmark(cfg)
        report = result.report()
        report_path = write_report(report, out / f"{args.command}_report.json")
        written = [report_path]
        if args.command == "calibration":
            curves = calibration_curves_from_metrics(result.metrics(), [m.value for m in cfg.modes])
            written += write_calibration_tables(curves, out)
        elif args.command == "entropy":
            written += write_entropy_tables(result, out)
    except (UABoostError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if args.command == "benchmark":
        for row in report["rmse_table"]:
            print(f"{row['model']:<24} {row['mean']:.3f} ± {row['std']:.3f}")
    for p in written:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
