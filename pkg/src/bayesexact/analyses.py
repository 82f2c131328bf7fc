"""End-to-end test pipelines for a stratified 2x2x2 table and an R x C table."""

from __future__ import annotations

import math
import time
from functools import partial

from . import _kernels, seeding
from .engine import (
    EXACT,
    DeterministicStatistic,
    PosteriorProbability,
    PosteriorRatio,
    TestReport,
    bayes_region_alpha,
    evaluate_space,
    exact_p_value,
    exact_p_value_enumerated,
    mc_significance,
    rank_key,
)
from .errors import ShapeMismatch, UnsupportedCombination
from .hypotheses import CONCORDANCE, POSITIVE_DEPENDENCE, SIMPSON, epsilon_null
from .nulldist import (
    RxCMargins,
    StratifiedMargins,
    enumerate_stratified_space,
    iter_tables,
    rxc_count,
    rxc_log_pmf,
    stratified_null_pmf,
    stratified_point,
    stratified_table,
)
from .posterior import DEFAULT_PRIOR, event_probability
from .tables import ContingencyTable, gamma_hat

TESTS = ("simpson", "simpson-ratio", "gamma-exact", "concordance", "positive-dependence")
POSTERIOR_EVENTS = {"concordance": CONCORDANCE, "positive-dependence": POSITIVE_DEPENDENCE}
EXACT_POSTERIOR_LIMIT = 100_000


def _require_shape(table: ContingencyTable, test: str):
    if test.startswith("simpson"):
        if table.shape != (2, 2, 2):
            raise ShapeMismatch(f"{test} needs a 2x2x2 table, got {table.shape}")
    elif table.ndim != 2:
        raise ShapeMismatch(f"{test} needs a two-way table, got {table.shape}")


def simpson_statistic(margins: StratifiedMargins, ratio: bool = False, n_posterior: int = 2_000_000,
                      n_null_event: int = 1_000_000, epsilon: float = 0.1,
                      prior: float = DEFAULT_PRIOR):
    """Pr(P1 | n), or Pr(P1 | n) / Pr(P0(epsilon) | n), as a statistic of
    stratified sample points."""
    to_table = partial(stratified_table, margins=margins)
    if ratio:
        return PosteriorRatio("simpson_ratio", SIMPSON, epsilon_null(epsilon), n_posterior,
                              n_null_event, prior, to_table)
    return PosteriorProbability("simpson_posterior", SIMPSON, n_posterior, prior, to_table)


def simpson_test(table: ContingencyTable, seed: int, ratio: bool = False,
                 n_posterior: int = 2_000_000, n_null_event: int = 1_000_000,
                 epsilon: float = 0.1, prior: float = DEFAULT_PRIOR, workers=None) -> TestReport:
    """Exact test of conditional independence against the Simpson reversal,
    over every table sharing the stratum margins."""
    _require_shape(table, "simpson")
    margins = StratifiedMargins.from_table(table)
    space = enumerate_stratified_space(margins)
    stat = simpson_statistic(margins, ratio, n_posterior, n_null_event, epsilon, prior)
    report = exact_p_value(space, partial(stratified_null_pmf, margins=margins), stat,
                           stratified_point(table), seed, workers)
    report.details["observed_point"] = list(stratified_point(table))
    report.details["space_size"] = len(space)
    report.details["points"] = [list(pt) for pt in space]
    return report


def gamma_exact_test(table: ContingencyTable, workers=None) -> TestReport:
    """Exact gamma-hat test by full enumeration of the fixed-margin tables."""
    _require_shape(table, "gamma-exact")
    report = exact_p_value_enumerated(RxCMargins.from_table(table), _kernels.gamma_stat, table,
                                      workers)
    report.statistic_name = "gamma_hat"
    return report


def gamma_mc_test(table: ContingencyTable, n_null: int, seed: int, workers=None) -> TestReport:
    _require_shape(table, "gamma-exact")
    stat = DeterministicStatistic("gamma_hat", gamma_hat)
    return mc_significance(RxCMargins.from_table(table), stat, gamma_hat(table), n_null, seed,
                           workers)


def posterior_mc_test(table: ContingencyTable, test: str, seed: int, n_posterior: int = 100_000,
                      n_null: int = 10_000, n_observed: int | None = None,
                      prior: float = DEFAULT_PRIOR, workers=None) -> TestReport:
    """Posterior probability of an ordinal-dependence event at the observed
    table, with its significance estimated from null-sampled tables.

    ``n_observed`` draws (default ``n_posterior``) estimate the observed
    statistic; every null table uses ``n_posterior`` draws.
    """
    _require_shape(table, test)
    start = time.perf_counter()
    event = POSTERIOR_EVENTS[test]
    n_observed = n_posterior if n_observed is None else n_observed
    obs_seed = seeding.table_seed(seed, table.counts)
    obs = event_probability(table, event, prior, n_observed, obs_seed)
    stat = PosteriorProbability(f"posterior_{event.name}", event, n_posterior, prior)
    report = mc_significance(RxCMargins.from_table(table), stat, obs.estimate, n_null, seed,
                             workers)
    report.statistic_se = obs.std_error
    report.seeds["observed_statistic"] = obs_seed
    report.sample_sizes["posterior_observed"] = n_observed
    report.wall_clock_seconds = time.perf_counter() - start
    return report


def posterior_exact_test(table: ContingencyTable, test: str, seed: int, n_posterior: int,
                         prior: float = DEFAULT_PRIOR) -> TestReport:
    """Exact p-value of a posterior statistic over every fixed-margin table.

    Each table's estimate is seeded by its contents.  Feasible only for
    small spaces.
    """
    _require_shape(table, test)
    start = time.perf_counter()
    event = POSTERIOR_EVENTS[test]
    stat = PosteriorProbability(f"posterior_{event.name}", event, n_posterior, prior)
    obs = stat(table, seeding.table_seed(seed, table.counts))
    obs_key = rank_key(obs.value)
    tail, n_tables = [], 0
    for arr in iter_tables(RxCMargins.from_table(table)):
        n_tables += 1
        t = ContingencyTable(arr.copy())
        if rank_key(stat(t, seeding.table_seed(seed, arr)).value) >= obs_key:
            tail.append(math.exp(rxc_log_pmf(t)))
    return TestReport(
        statistic_name=stat.name,
        statistic=obs.value,
        statistic_se=obs.std_error,
        p_value=min(1.0, math.fsum(tail)),
        p_value_se=0.0,
        method=EXACT,
        seeds={"master": seed},
        sample_sizes={"posterior_per_table": n_posterior, "space": n_tables},
        wall_clock_seconds=time.perf_counter() - start,
        qualifying_count=len(tail),
        details={"statistic": stat.describe()},
    )


def run_test(table: ContingencyTable, test: str, seed: int, mode: str | None = None,
             prior: float = DEFAULT_PRIOR, epsilon: float = 0.1, n_posterior: int = 100_000,
             n_null: int = 10_000, n_null_event: int | None = None, n_observed: int | None = None,
             long_run: bool = False, workers=None) -> TestReport:
    """Dispatch one named test.  ``mode`` is "exact" or "mc"."""
    if test not in TESTS:
        raise UnsupportedCombination(f"unknown test {test!r}")
    _require_shape(table, test)
    if mode is None:
        mode = "mc" if test in POSTERIOR_EVENTS else "exact"
    if mode not in ("exact", "mc"):
        raise UnsupportedCombination(f"unknown mode {mode!r}")
    if test.startswith("simpson"):
        if mode != "exact":
            raise UnsupportedCombination("the Simpson tests run on the enumerated space only")
        return simpson_test(table, seed, test == "simpson-ratio", n_posterior,
                            n_null_event or n_posterior, epsilon, prior, workers)
    if test == "gamma-exact":
        if mode == "exact":
            return gamma_exact_test(table, workers)
        return gamma_mc_test(table, n_null, seed, workers)
    if mode == "exact":
        size = rxc_count(RxCMargins.from_table(table))
        if size > EXACT_POSTERIOR_LIMIT and not long_run:
            raise UnsupportedCombination(
                f"exact mode would estimate a posterior for {size} tables; pass --long-run")
        return posterior_exact_test(table, test, seed, n_posterior, prior)
    return posterior_mc_test(table, test, seed, n_posterior, n_null, n_observed, prior, workers)


def simpson_region(table: ContingencyTable, seed: int, alpha: float = 0.05,
                   n_posterior: int = 100_000, n_null_event: int | None = None,
                   epsilon: float = 0.1, prior: float = DEFAULT_PRIOR, workers=None) -> dict:
    """Level-alpha Bayes region on the stratified space, ordered by
    Pr(P1 | n) / Pr(P0(epsilon) | n)."""
    _require_shape(table, "simpson")
    margins = StratifiedMargins.from_table(table)
    space = enumerate_stratified_space(margins)
    stat = simpson_statistic(margins, True, n_posterior, n_null_event or n_posterior, epsilon, prior)
    ratios = [v.value for v in evaluate_space(space, stat, seed, workers)]
    ratios = [math.nan if r is None else r for r in ratios]
    pmf = partial(stratified_null_pmf, margins=margins)
    region, delta = bayes_region_alpha(space, pmf, ratios, alpha)
    chosen = sorted(region)
    return {
        "alpha": alpha,
        "delta_alpha": delta,
        "region": [list(pt) for pt in chosen],
        "region_null_probability": math.fsum(pmf(pt) for pt in chosen),
        "observed_in_region": stratified_point(table) in region,
        "space_size": len(space),
    }
