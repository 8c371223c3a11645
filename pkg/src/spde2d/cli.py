"""Command-line interface.

Subcommands: ``simulate`` (field dump), ``estimate`` (single pipeline on a
stored field), ``mc`` (Monte Carlo summary), ``oracle`` (expected
squared-increment and asymptotic-mean table), ``cross-section`` (figure
data).  Exit status 0 on success and 1 on configuration errors; estimation
failure tags are data, recorded in the outputs, not process errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

# Replications parallelize across worker processes; a multi-threaded BLAS
# pool underneath them only adds contention.  Must run before numpy loads.
for _var in ("OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "OMP_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

from . import fieldio
from .errors import ConfigError, GridMismatchError, MemoryBudgetError, ThinningError
from .harness import (ExperimentConfig, cross_section_dump, default_config,
                      estimate_field, load_config, run_monte_carlo)
from .increments import (asymptotic_mean, expected_squared_increment_oracle)
from .simulate import simulate_field


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="experiment configuration JSON "
                   "(defaults to the desk-scale configuration)")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--replications", type=int, help="override the "
                   "replication count")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads for Monte Carlo (default 1)")
    p.add_argument("--out-dir", default=".", help="output directory")


def _load(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else default_config()
    overrides = config.to_dict()
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "replications", None) is not None:
        overrides["replications"] = args.replications
    return ExperimentConfig.from_dict(overrides)


def _outpath(args, name: str) -> str:
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def _cmd_simulate(args) -> int:
    config = _load(args)
    field = simulate_field(config.params, config.kind, config.grid,
                           config.trunc, seed=config.seed, rep=args.rep)
    path = _outpath(args, args.name)
    fieldio.write_field(field, path)
    print(f"wrote {path} and {path}.meta.json")
    return 0


def _cmd_estimate(args) -> int:
    config = _load(args)
    field = fieldio.read_field(args.field)
    record = estimate_field(config, field)
    payload = record.to_dict()
    if args.covariance:
        payload["covariance"] = _covariance_at_estimates(config, record)
    path = _outpath(args, "estimate.json")
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {path}")
    return 0


def _covariance_at_estimates(config, record):
    """Asymptotic covariance evaluated at the plug-in estimates (null when
    the estimates are incomplete or outside the admissible region)."""
    from .model import ModelParams, NoiseKind
    from .plugins import covariance_J, covariance_K, covariance_L

    est = record.estimates
    if est.failure is not None:
        return None
    try:
        params = ModelParams(
            theta0=est.theta0 if est.theta0 is not None else 0.0,
            theta1=est.theta1, eta1=est.eta1, theta2=est.theta2,
            sigma=est.sigma2 ** 0.5, alpha=config.params.alpha,
            mu0=est.mu0)
        if config.kind is NoiseKind.Q1:
            cov = covariance_J(params)
        elif config.kind is NoiseKind.Q2_KNOWN_MU0:
            cov = covariance_K(params)
        else:
            cov = covariance_L(params)
    except (ConfigError, ValueError):
        return None
    return {"which": cov.which, "labels": list(cov.labels),
            "entries": cov.entries.tolist()}


def _cmd_mc(args) -> int:
    config = _load(args)
    table = run_monte_carlo(config, threads=args.threads)
    csv_path = _outpath(args, "summary.csv")
    with open(csv_path, "w") as fh:
        fh.write(table.to_csv())
    json_path = _outpath(args, "summary.json")
    with open(json_path, "w") as fh:
        fh.write(table.to_json())
    records_path = _outpath(args, "records.json")
    with open(records_path, "w") as fh:
        fh.write(table.records_json())
    print(f"wrote {csv_path}, {json_path}, {records_path}")
    return 0


def _cmd_oracle(args) -> int:
    config = _load(args)
    n_steps = config.grid.N
    if args.i:
        idx = [int(tok) for tok in args.i.split(",")]
    else:
        idx = list(range(1, n_steps + 1))
    lines = ["i,expected_squared_increment"]
    for i in idx:
        val = expected_squared_increment_oracle(
            config.params, config.kind, i, n_steps, args.y, args.z,
            config.trunc)
        lines.append(f"{i},{val!r}")
    limit = asymptotic_mean(config.params, config.kind, args.y, args.z)
    lines.append(f"asymptotic_mean,{limit!r}")
    path = _outpath(args, "oracle.csv")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"wrote {path}")
    return 0


def _cmd_cross_section(args) -> int:
    field = fieldio.read_field(args.field)
    section = cross_section_dump(field, args.axis, args.level)
    name = f"cross_section_{args.axis}_{args.level}.csv"
    path = _outpath(args, name)
    with open(path, "w") as fh:
        fh.write(section.to_csv())
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spde2d",
        description="Simulation and estimation for linear parabolic "
                    "random fields on the unit square")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate one field and dump it")
    _add_common(p)
    p.add_argument("--rep", type=int, default=0, help="replication index")
    p.add_argument("--name", default="field.bin", help="dump file name")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("estimate", help="estimate from a stored field dump")
    _add_common(p)
    p.add_argument("--field", required=True, help="path to a field dump")
    p.add_argument("--covariance", action="store_true",
                   help="attach the asymptotic covariance evaluated at the "
                        "plug-in estimates")
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("mc", help="Monte Carlo summary over replications")
    _add_common(p)
    p.set_defaults(func=_cmd_mc)

    p = sub.add_parser("oracle", help="expected squared-increment table")
    _add_common(p)
    p.add_argument("--y", type=float, default=0.5)
    p.add_argument("--z", type=float, default=0.5)
    p.add_argument("--i", help="comma-separated increment indices "
                   "(default: all)")
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("cross-section", help="slice a stored field dump")
    _add_common(p)
    p.add_argument("--field", required=True, help="path to a field dump")
    p.add_argument("--axis", required=True, choices=["t", "y", "z"])
    p.add_argument("--level", required=True, type=float)
    p.set_defaults(func=_cmd_cross_section)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, GridMismatchError, ThinningError, MemoryBudgetError,
            FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
