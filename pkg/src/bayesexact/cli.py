"""Command-line interface.

    bayesexact test --test gamma-exact --seed 1 table.txt
    bayesexact enumerate table.txt
    bayesexact region --seed 1 --alpha 0.05 table.txt
    bayesexact power --seed 1 [--config study.json] [--paper-scale]
    bayesexact demo --seed 1

Reports are JSON objects with sorted keys.  Exit status is 0 on success,
2 for bad input and 3 for numerical failures.  BAYESEXACT_WORKERS sets the
number of worker processes; results do not depend on it.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time

from . import analyses, power
from ._parallel import default_workers
from .errors import InputError, NumericError, ParseError, ShapeMismatch, UnsupportedCombination
from .nulldist import (
    RxCMargins,
    StratifiedMargins,
    enumerate_stratified_space,
    rxc_count,
    rxc_pmf,
    stratified_null_pmf,
    stratified_point,
)
from .tables import ContingencyTable, read_table

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


def _positive_int(text):
    value = int(float(text))
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _probability(text):
    value = float(text)
    if not 0 <= value <= 1:
        raise argparse.ArgumentTypeError("must lie in [0, 1]")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bayesexact",
                                     description="Exact and Bayes-ordered tests for contingency tables.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed_required=True):
        p.add_argument("--seed", type=int, required=seed_required)
        p.add_argument("--output", "-o", help="write the report here instead of stdout")

    def posterior_opts(p):
        p.add_argument("--prior", type=_positive_float, default=0.5)
        p.add_argument("--epsilon", type=_positive_float, default=0.1)
        p.add_argument("--n-posterior", type=_positive_int, default=100_000)
        p.add_argument("--n-null-event", type=_positive_int,
                       help="draws for the non-discovery event (default: --n-posterior)")

    p = sub.add_parser("test", help="run one named test on a table file")
    p.add_argument("table")
    p.add_argument("--test", required=True, choices=analyses.TESTS)
    p.add_argument("--mode", choices=("exact", "mc"))
    p.add_argument("--n-null", type=_positive_int, default=10_000)
    p.add_argument("--n-observed", type=_positive_int,
                   help="posterior draws for the observed statistic (default: --n-posterior)")
    p.add_argument("--long-run", action="store_true",
                   help="allow exact mode for posterior statistics on large spaces")
    posterior_opts(p)
    common(p, seed_required=True)

    p = sub.add_parser("enumerate", help="size of the conditional sample space")
    p.add_argument("table")
    common(p, seed_required=False)

    p = sub.add_parser("region", help="level-alpha Bayes region of a 2x2x2 table")
    p.add_argument("table")
    p.add_argument("--alpha", type=_probability, default=0.05)
    posterior_opts(p)
    common(p)

    p = sub.add_parser("power", help="importance-sampled power study")
    p.add_argument("--config", help="JSON file with PowerStudyConfig fields")
    p.add_argument("--paper-scale", "--full-scale", dest="paper_scale", action="store_true",
                   help="published sample sizes (10x the defaults)")
    common(p)

    p = sub.add_parser("demo", help="Gaussian mean-most-powerful demonstration")
    p.add_argument("--K", type=_positive_int, default=100)
    p.add_argument("--mu1", type=float, default=3.2)
    p.add_argument("--alpha", type=_probability, default=0.05)
    p.add_argument("--n-mc", type=_positive_int, default=1_000_000)
    common(p)
    return parser


def _load(path: str) -> ContingencyTable:
    try:
        return read_table(path)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None


def _enumerate(table: ContingencyTable) -> dict:
    if table.shape == (2, 2, 2):
        margins = StratifiedMargins.from_table(table)
        space = enumerate_stratified_space(margins)
        point = stratified_point(table)
        return {"space": "stratified", "n_points": len(space), "observed_point": list(point),
                "observed_null_probability": stratified_null_pmf(point, margins)}
    if table.ndim != 2:
        raise ShapeMismatch(f"expected a 2x2x2 or two-way table, got {table.shape}")
    margins = RxCMargins.from_table(table)
    return {"space": "fixed-margins", "n_points": rxc_count(margins),
            "row_sums": list(margins.rows), "col_sums": list(margins.cols),
            "observed_null_probability": rxc_pmf(table)}


def _power_config(args) -> power.PowerStudyConfig:
    base = power.PowerStudyConfig.full_scale if args.paper_scale else power.PowerStudyConfig.default
    cfg = base(seed=args.seed).to_dict()
    if args.config:
        try:
            with open(args.config) as fh:
                override = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"bad config {args.config}: {exc}") from None
        unknown = set(override) - set(cfg)
        if unknown:
            raise ParseError(f"unknown config fields: {sorted(unknown)}")
        cfg.update(override)
    cfg["seed"] = args.seed
    try:
        return power.PowerStudyConfig(**cfg)
    except InputError:
        raise
    except (TypeError, ValueError) as exc:
        raise ParseError(f"bad config value: {exc}") from None


def execute(args) -> dict:
    """Run a parsed command; returns the report body."""
    workers = default_workers()
    if args.command == "test":
        table = _load(args.table)
        report = analyses.run_test(
            table, args.test, args.seed, args.mode, args.prior, args.epsilon, args.n_posterior,
            args.n_null, args.n_null_event, args.n_observed, args.long_run, workers)
        return report.to_dict()
    if args.command == "enumerate":
        return _enumerate(_load(args.table))
    if args.command == "region":
        table = _load(args.table)
        if table.shape != (2, 2, 2):
            raise UnsupportedCombination("regions are computed for 2x2x2 tables only")
        return analyses.simpson_region(table, args.seed, args.alpha, args.n_posterior,
                                       args.n_null_event, args.epsilon, args.prior, workers)
    if args.command == "power":
        cfg = _power_config(args)
        summary = power.power_study(cfg, workers)
        return {**summary.to_dict(), "study": cfg.to_dict()}
    if args.command == "demo":
        lrt, bayes = power.gaussian_demo(args.K, args.mu1, args.alpha, args.n_mc, args.seed)
        exact_lrt, exact_bayes = power.gaussian_exact_powers(args.K, args.mu1, args.alpha)
        return {"lrt_power": lrt, "bayes_power": bayes, "lrt_power_exact": exact_lrt,
                "bayes_power_exact": exact_bayes}
    raise UnsupportedCombination(f"unknown command {args.command!r}")


def _jsonable(obj):
    if isinstance(obj, float):
        if math.isnan(obj):
            return None
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item"):  # numpy scalars
        return _jsonable(obj.item())
    return obj


def render(report: dict) -> str:
    return json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n"


def _config_echo(args) -> dict:
    echo = {k: v for k, v in vars(args).items() if k != "output"}
    echo["workers"] = default_workers()
    return echo


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    start = time.perf_counter()
    try:
        body = execute(args)
    except InputError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    body = {"config": _config_echo(args), "command": args.command, **body}
    body.setdefault("wall_clock_seconds", time.perf_counter() - start)
    text = render(body)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
