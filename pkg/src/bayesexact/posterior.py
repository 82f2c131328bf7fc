"""Dirichlet posterior Monte Carlo for event probabilities.

With a symmetric Dirichlet prior on the cell probabilities the posterior
given a table is Dirichlet(counts + prior).  Event probabilities are
estimated by the proportion of posterior draws inside the event.

Draws are produced in fixed-size blocks, each with its own Philox stream
keyed by (seed, block index), so an estimate is a pure function of
(table, event, prior, n_samples, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import seeding
from .errors import DegenerateDraw, NonPositivePrior
from .tables import ContingencyTable, ProbabilityVector

BLOCK_SIZE = 1 << 16
MAX_RETRIES = 16
DEFAULT_PRIOR = 0.5


@dataclass(frozen=True, eq=False)
class DirichletParams:
    concentration: np.ndarray

    def __post_init__(self):
        conc = np.asarray(self.concentration, dtype=np.float64)
        if not np.all(conc > 0) or not np.all(np.isfinite(conc)):
            raise NonPositivePrior("concentrations must be positive and finite")
        conc = np.ascontiguousarray(conc)
        conc.setflags(write=False)
        object.__setattr__(self, "concentration", conc)

    @property
    def shape(self) -> tuple:
        return self.concentration.shape


@dataclass(frozen=True)
class EventEstimate:
    estimate: float
    std_error: float
    n_samples: int
    seed: int
    hits: int


def posterior_params(table: ContingencyTable, prior_concentration: float = DEFAULT_PRIOR) -> DirichletParams:
    if not prior_concentration > 0:
        raise NonPositivePrior(f"prior concentration must be positive, got {prior_concentration}")
    return DirichletParams(table.counts + float(prior_concentration))


def _normalized_gammas(alpha: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_gamma(np.broadcast_to(alpha, (size, alpha.size)))
    s = g.sum(axis=1)
    bad = np.flatnonzero(s == 0)
    tries = 0
    while bad.size:
        if tries == MAX_RETRIES:
            raise DegenerateDraw("gamma draws underflowed to zero")
        g[bad] = rng.standard_gamma(np.broadcast_to(alpha, (bad.size, alpha.size)))
        s[bad] = g[bad].sum(axis=1)
        bad = bad[s[bad] == 0]
        tries += 1
    g /= s[:, None]
    return g


def sample_dirichlet(params: DirichletParams, rng: np.random.Generator) -> ProbabilityVector:
    """One Dirichlet draw: independent unit-scale gammas, normalized."""
    g = _normalized_gammas(params.concentration.ravel(), 1, rng)[0]
    return ProbabilityVector(g.reshape(params.shape))


def sample_dirichlet_many(params: DirichletParams, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` draws as a (size, cells) array of flattened probability vectors."""
    return _normalized_gammas(params.concentration.ravel(), size, rng)


def _binomial_se(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


def event_probabilities(table: ContingencyTable, predicates, prior_concentration: float = DEFAULT_PRIOR,
                        n_samples=100_000, seed: int = 0) -> list:
    """Posterior probabilities of several events from one shared draw stream.

    ``n_samples`` is an int or one int per predicate; predicate k is scored
    on the first ``n_samples[k]`` draws.
    """
    predicates = list(predicates)
    if np.ndim(n_samples) == 0:
        sizes = [int(n_samples)] * len(predicates)
    else:
        sizes = [int(n) for n in n_samples]
    if len(sizes) != len(predicates) or min(sizes, default=1) < 1:
        raise ValueError("need one positive sample size per predicate")
    params = posterior_params(table, prior_concentration)
    alpha = params.concentration.ravel()
    total = max(sizes)
    hits = [0] * len(predicates)
    for block, start in enumerate(range(0, total, BLOCK_SIZE)):
        size = min(BLOCK_SIZE, total - start)
        draws = _normalized_gammas(alpha, size, seeding.generator(seed, block))
        for k, pred in enumerate(predicates):
            if sizes[k] <= start:
                continue
            use = min(size, sizes[k] - start)
            hits[k] += int(np.count_nonzero(pred.evaluate_batch(draws[:use], params.shape)))
    out = []
    for k in range(len(predicates)):
        est = hits[k] / sizes[k]
        out.append(EventEstimate(est, _binomial_se(est, sizes[k]), sizes[k], int(seed), hits[k]))
    return out


def event_probability(table: ContingencyTable, predicate, prior_concentration: float = DEFAULT_PRIOR,
                      n_samples: int = 100_000, seed: int = 0) -> EventEstimate:
    """Posterior probability of ``predicate`` given ``table``."""
    return event_probabilities(table, [predicate], prior_concentration, n_samples, seed)[0]
