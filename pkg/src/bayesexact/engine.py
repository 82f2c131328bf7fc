"""Exact and Monte Carlo significance, Bayes rejection regions, and the
finite-model quantities (mean significance, mean power, average risk) used
to check their optimality.

Sample points are ordered by a statistic; larger values are stronger
evidence for the discovery event.  A statistic value of ``None`` or NaN
(undefined, e.g. gamma of a table with no untied pairs, or a 0/0 posterior
ratio) ranks below every defined value.  Estimated statistics are compared
as they are, with no tie tolerance.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import partial
from typing import Callable

import numpy as np

from . import seeding
from ._parallel import pmap
from .errors import EmptyNullEvent, InputError, ObservedNotInSpace
from .hypotheses import EventPredicate
from .nulldist import RxCMargins, enumerate_tail, iter_tables, rxc_sample_many, rxc_log_pmf
from .posterior import DEFAULT_PRIOR, event_probabilities
from .tables import ContingencyTable

EXACT = "exact-enumeration"
MC = "mc-significance"
LEVEL_SLACK = 1e-12


def rank_key(value) -> float:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return -math.inf
    return float(value)


@dataclass(frozen=True)
class StatValue:
    value: float | None
    std_error: float = 0.0


# ---------------------------------------------------------------- statistics


class StatisticSpec:
    """A statistic of a sample point.  Call as ``stat(point, seed)``."""

    mode = "deterministic"
    tie_tolerance = 0.0

    def __call__(self, point, seed: int | None = None) -> StatValue:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"name": self.name, "mode": self.mode, "n_samples": self.n_samples,
                "tie_tolerance": self.tie_tolerance}


def _identity(point):
    return point


@dataclass(frozen=True)
class DeterministicStatistic(StatisticSpec):
    name: str
    func: Callable
    n_samples = None

    def __call__(self, point, seed=None) -> StatValue:
        return StatValue(self.func(point), 0.0)


@dataclass(frozen=True)
class PosteriorProbability(StatisticSpec):
    """Posterior probability of an event, estimated from Dirichlet draws."""

    name: str
    predicate: EventPredicate
    n_samples: int
    prior: float = DEFAULT_PRIOR
    to_table: Callable = _identity
    mode: str = "posterior-mc"

    def __call__(self, point, seed=0) -> StatValue:
        est = event_probabilities(self.to_table(point), [self.predicate], self.prior,
                                  self.n_samples, seed)[0]
        return StatValue(est.estimate, est.std_error)

    def describe(self) -> dict:
        return {**super().describe(), "event": self.predicate.describe(), "prior": self.prior}


@dataclass(frozen=True)
class PosteriorRatio(StatisticSpec):
    """Pr(numerator event | n) / Pr(denominator event | n).

    Both estimates share one draw stream; the denominator uses the first
    ``n_denominator`` draws.  A zero denominator gives ``inf`` (or None
    when the numerator is zero too).
    """

    name: str
    numerator: EventPredicate
    denominator: EventPredicate
    n_numerator: int
    n_denominator: int
    prior: float = DEFAULT_PRIOR
    to_table: Callable = _identity
    mode: str = "posterior-mc"

    @property
    def n_samples(self):
        return max(self.n_numerator, self.n_denominator)

    def __call__(self, point, seed=0) -> StatValue:
        num, den = event_probabilities(self.to_table(point), [self.numerator, self.denominator],
                                       self.prior, [self.n_numerator, self.n_denominator], seed)
        if den.hits == 0:
            return StatValue(math.inf if num.hits else None, math.nan)
        ratio = num.estimate / den.estimate
        rel = 0.0
        if num.hits:
            rel += (num.std_error / num.estimate) ** 2
        rel += (den.std_error / den.estimate) ** 2
        return StatValue(ratio, ratio * math.sqrt(rel))

    def describe(self) -> dict:
        return {**super().describe(), "numerator": self.numerator.describe(),
                "denominator": self.denominator.describe(),
                "n_numerator": self.n_numerator, "n_denominator": self.n_denominator,
                "prior": self.prior}


def as_statistic(stat) -> StatisticSpec:
    if isinstance(stat, StatisticSpec):
        return stat
    return DeterministicStatistic(getattr(stat, "__name__", "statistic"), stat)


# -------------------------------------------------------------------- report


@dataclass
class TestReport:
    statistic_name: str
    statistic: float | None
    statistic_se: float
    p_value: float
    p_value_se: float
    method: str
    seeds: dict = field(default_factory=dict)
    sample_sizes: dict = field(default_factory=dict)
    wall_clock_seconds: float = 0.0
    qualifying_count: int | None = None
    details: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class

    def to_dict(self) -> dict:
        return {
            "statistic_name": self.statistic_name,
            "statistic": self.statistic,
            "statistic_se": self.statistic_se,
            "p_value": self.p_value,
            "p_value_se": self.p_value_se,
            "method": self.method,
            "qualifying_count": self.qualifying_count,
            "seeds": self.seeds,
            "n_samples": self.sample_sizes,
            "details": self.details,
            "wall_clock_seconds": self.wall_clock_seconds,
        }


def _eval_indexed(statistic, seed, item):
    index, point = item
    point_seed = seeding.derive_seed(seed, index) if statistic.mode != "deterministic" else None
    return statistic(point, point_seed)


def evaluate_space(space, statistic, seed: int = 0, workers=None) -> list:
    """Statistic of every point; MC statistics use seed (seed, point index)."""
    statistic = as_statistic(statistic)
    return pmap(partial(_eval_indexed, statistic, seed), list(enumerate(space)), workers)


def p_value_from_values(values, probs, observed_index: int):
    """Null mass of points whose value is >= the observed point's value."""
    keys = [rank_key(v.value if isinstance(v, StatValue) else v) for v in values]
    obs = keys[observed_index]
    chosen = [p for k, p in zip(keys, probs) if k >= obs]
    return min(1.0, math.fsum(chosen)), len(chosen)


def exact_p_value(space, null_pmf, statistic, observed_point, seed: int = 0,
                  workers=None) -> TestReport:
    """Exact significance of the observed point over an explicit sample space.

    p = sum of null probabilities of the points whose statistic is >= the
    observed one.
    """
    start = time.perf_counter()
    space = list(space)
    try:
        obs_index = space.index(observed_point)
    except ValueError:
        raise ObservedNotInSpace(f"{observed_point!r} is not in the sample space") from None
    statistic = as_statistic(statistic)
    values = evaluate_space(space, statistic, seed, workers)
    probs = [null_pmf(pt) for pt in space]
    p, n_qual = p_value_from_values(values, probs, obs_index)
    obs = values[obs_index]
    return TestReport(
        statistic_name=statistic.name,
        statistic=obs.value,
        statistic_se=obs.std_error,
        p_value=p,
        p_value_se=0.0,
        method=EXACT,
        seeds={"master": seed, "observed_point": seeding.derive_seed(seed, obs_index)
               if statistic.mode != "deterministic" else None},
        sample_sizes={"posterior_per_point": statistic.n_samples, "space": len(space)},
        wall_clock_seconds=time.perf_counter() - start,
        qualifying_count=n_qual,
        details={"statistic": statistic.describe(),
                 "values": [v.value for v in values]},
    )


def _is_compiled(func) -> bool:
    return hasattr(func, "py_func")


def exact_p_value_enumerated(margins: RxCMargins, statistic, observed: ContingencyTable,
                             workers=None) -> TestReport:
    """Exact p-value by streaming every table with the observed margins.

    ``statistic`` is either a numba-jitted function of an int64 array
    (compiled enumeration) or a Python function of a ContingencyTable.
    """
    start = time.perf_counter()
    if not margins.matches(observed):
        raise ObservedNotInSpace("observed table does not have the given margins")
    name = getattr(statistic, "__name__", "statistic")
    if _is_compiled(statistic):
        obs_value = float(statistic(observed.counts))
        res = enumerate_tail(margins, statistic, obs_value, workers=workers)
        n_tables, n_qual, p = res.n_tables, res.n_qualifying, res.tail_probability
        details = {"n_tables": n_tables, "total_null_probability": res.total_probability}
        reported = None if math.isinf(obs_value) and obs_value < 0 else obs_value
    else:
        obs_key = rank_key(statistic(observed))
        reported = statistic(observed)
        tail, n_tables, n_qual = [], 0, 0
        for arr in iter_tables(margins):
            n_tables += 1
            table = ContingencyTable(arr.copy())
            if rank_key(statistic(table)) >= obs_key:
                n_qual += 1
                tail.append(math.exp(rxc_log_pmf(table)))
        p = min(1.0, math.fsum(tail))
        details = {"n_tables": n_tables}
    return TestReport(
        statistic_name=name,
        statistic=reported,
        statistic_se=0.0,
        p_value=p,
        p_value_se=0.0,
        method=EXACT,
        wall_clock_seconds=time.perf_counter() - start,
        qualifying_count=n_qual,
        details=details,
    )


def _eval_table(statistic, seed, counts):
    table = ContingencyTable(counts)
    point_seed = seeding.table_seed(seed, counts) if statistic.mode != "deterministic" else None
    return statistic(table, point_seed).value


def evaluate_tables(tables: np.ndarray, statistic, seed: int = 0, workers=None) -> np.ndarray:
    """Rank keys of a statistic over a stack of tables (n, R, C).

    Monte Carlo statistics are seeded by table contents, so equal tables get
    equal values; each distinct table is evaluated once.
    """
    statistic = as_statistic(statistic)
    tables = np.asarray(tables, dtype=np.int64)
    if tables.shape[0] == 0:
        return np.empty(0)
    flat = tables.reshape(tables.shape[0], -1)
    uniq, inverse = np.unique(flat, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    shape = tables.shape[1:]
    vals = pmap(partial(_eval_table, statistic, seed), [u.reshape(shape) for u in uniq], workers)
    keys = np.array([rank_key(v) for v in vals], dtype=np.float64)
    return keys[inverse]


def mc_significance(margins: RxCMargins, statistic, observed_stat: float, n_null: int,
                    seed: int, workers=None) -> TestReport:
    """Monte Carlo significance: the share of null-sampled tables whose
    statistic is >= ``observed_stat``, with its binomial standard error."""
    if n_null < 1:
        raise InputError("n_null must be at least 1")
    start = time.perf_counter()
    statistic = as_statistic(statistic)
    tables = rxc_sample_many(margins, n_null, seeding.generator(seed, seeding.NULL_TABLES))
    keys = evaluate_tables(tables, statistic, seed, workers)
    hits = int(np.count_nonzero(keys >= rank_key(observed_stat)))
    p = hits / n_null
    return TestReport(
        statistic_name=statistic.name,
        statistic=None if observed_stat is None else float(observed_stat),
        statistic_se=0.0,
        p_value=p,
        p_value_se=math.sqrt(p * (1 - p) / n_null),
        method=MC,
        seeds={"master": seed},
        sample_sizes={"null_tables": n_null, "posterior_per_table": statistic.n_samples},
        wall_clock_seconds=time.perf_counter() - start,
        qualifying_count=hits,
        details={"statistic": statistic.describe(),
                 "distinct_null_tables": int(len(np.unique(tables.reshape(n_null, -1), axis=0)))},
    )


# -------------------------------------------------------------------- regions


def _values(space, ratio_statistic):
    if callable(ratio_statistic):
        return [ratio_statistic(pt) for pt in space]
    vals = list(ratio_statistic)
    if len(vals) != len(space):
        raise InputError("need one ratio per sample point")
    return vals


def _ratio_key(value) -> float:
    # NaN (0/0) never enters a region
    return -math.inf if value is None or math.isnan(value) else float(value)


def bayes_region(space, ratio_statistic, delta: float) -> set:
    """Points whose ratio Pr(P1|n)/Pr(P0|n) is at least ``delta``."""
    space = list(space)
    vals = _values(space, ratio_statistic)
    return {pt for pt, v in zip(space, vals)
            if not (v is None or math.isnan(v)) and delta <= v}


def bayes_region_alpha(space, null_pmf, ratio_statistic, alpha: float):
    """Largest-ratio-first region with null probability at most ``alpha``.

    Points are added in decreasing ratio order, a group of tied ratios at a
    time, while the cumulative null probability stays <= alpha.  Returns the
    region and its threshold (``inf`` for an empty region).
    """
    if not 0.0 <= alpha <= 1.0:
        raise InputError("alpha must lie in [0, 1]")
    space = list(space)
    vals = [_ratio_key(v) for v in _values(space, ratio_statistic)]
    probs = [null_pmf(pt) if callable(null_pmf) else null_pmf[i] for i, pt in enumerate(space)]
    order = sorted(range(len(space)), key=lambda i: -vals[i])
    region, used, threshold = set(), [], math.inf
    limit = alpha + LEVEL_SLACK
    k = 0
    while k < len(order):
        v = vals[order[k]]
        if v == -math.inf:
            break
        group = [order[k]]
        k += 1
        while k < len(order) and vals[order[k]] == v:
            group.append(order[k])
            k += 1
        if math.fsum(used + [probs[i] for i in group]) > limit:
            break
        used.extend(probs[i] for i in group)
        region.update(space[i] for i in group)
        threshold = v
    return region, threshold


def conditional_bayes_region(partition, ratio_statistic, alpha: float) -> set:
    """Union of per-partition level-alpha Bayes regions.

    ``partition`` is a list of ``(space_a, null_pmf_a)``; null masses are
    renormalized within each part so the level holds conditionally.
    ``ratio_statistic`` is a function of a point, or anything indexable by
    the points.
    """
    if not callable(ratio_statistic):
        table = ratio_statistic  # a mapping or sequence indexed by the points
        ratio_statistic = table.__getitem__
    region = set()
    for space_a, pmf_a in partition:
        space_a = list(space_a)
        probs = [pmf_a(pt) if callable(pmf_a) else pmf_a[i] for i, pt in enumerate(space_a)]
        mass = math.fsum(probs)
        if mass <= 0:
            continue
        cond = [p / mass for p in probs]
        sub, _ = bayes_region_alpha(space_a, cond, ratio_statistic, alpha)
        region |= sub
    return region


# --------------------------------------------------------------- finite model


@dataclass(frozen=True, eq=False)
class FiniteModel:
    """Finite parameter set with prior weights, likelihood matrix
    ``likelihood[m, n] = Pr(n | p_m)`` and labels 0 (non-discovery event),
    1 (discovery event) or -1 (neither)."""

    prior: np.ndarray
    likelihood: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        prior = np.asarray(self.prior, dtype=np.float64)
        lik = np.asarray(self.likelihood, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if lik.ndim != 2 or lik.shape[0] != prior.shape[0] or labels.shape != prior.shape:
            raise InputError("prior, likelihood rows and labels must align")
        if np.any(prior < 0) or abs(prior.sum() - 1) > 1e-12:
            raise InputError("prior weights must be nonnegative and sum to 1")
        if np.any(lik < 0) or np.any(np.abs(lik.sum(axis=1) - 1) > 1e-12):
            raise InputError("each likelihood row must sum to 1")
        if not np.all(np.isin(labels, (-1, 0, 1))):
            raise InputError("labels must be -1, 0 or 1")
        object.__setattr__(self, "prior", prior)
        object.__setattr__(self, "likelihood", lik)
        object.__setattr__(self, "labels", labels)

    @property
    def n_points(self) -> int:
        return self.likelihood.shape[1]

    def marginal(self) -> np.ndarray:
        return self.prior @ self.likelihood

    def event_prior(self, label: int) -> float:
        return float(self.prior[self.labels == label].sum())

    def joint(self, label: int) -> np.ndarray:
        """Pr(n, P in event) for every n."""
        mask = self.labels == label
        return self.prior[mask] @ self.likelihood[mask]

    def posterior(self, label: int) -> np.ndarray:
        return self.joint(label) / self.marginal()

    def ratio(self) -> np.ndarray:
        """Pr(P1 | n) / Pr(P0 | n); inf where only the denominator is 0."""
        num, den = self.joint(1), self.joint(0)
        with np.errstate(divide="ignore", invalid="ignore"):
            return num / den

    def bayes_factor(self) -> np.ndarray:
        """Pr(n | P1) / Pr(n | P0)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return (self.joint(1) / self.event_prior(1)) / (self.joint(0) / self.event_prior(0))

    @classmethod
    def random(cls, rng: np.random.Generator, n_params: int, n_points: int) -> "FiniteModel":
        prior = rng.dirichlet(np.ones(n_params))
        lik = rng.dirichlet(np.ones(n_points), size=n_params)
        labels = rng.permutation(np.resize([0, 1, -1], n_params))
        labels[0], labels[1] = 0, 1
        return cls(prior, lik, labels)


def _mask(model: FiniteModel, region) -> np.ndarray:
    mask = np.zeros(model.n_points, dtype=bool)
    idx = list(region)
    if idx:
        mask[np.asarray(idx, dtype=np.int64)] = True
    return mask


def _mean_rejection(model: FiniteModel, region, label: int) -> float:
    weight = model.event_prior(label)
    if weight <= 0:
        raise EmptyNullEvent(f"event {label} has zero prior mass")
    mask = _mask(model, region)
    return float(model.joint(label)[mask].sum() / weight)


def mean_significance(model: FiniteModel, region) -> float:
    """Pr(N in region | P in the non-discovery event)."""
    return _mean_rejection(model, region, 0)


def mean_power(model: FiniteModel, region) -> float:
    """Pr(N in region | P in the discovery event)."""
    return _mean_rejection(model, region, 1)


def average_risk(model: FiniteModel, region, lambda1: float, lambda2: float) -> float:
    """Bayes risk of rejecting on ``region`` under the two-error loss:
    lambda1 per false discovery, lambda2 per missed discovery."""
    mask = _mask(model, region)
    false_disc = model.joint(0)[mask].sum()
    missed = model.joint(1)[~mask].sum()
    return float(lambda1 * false_disc + lambda2 * missed)

