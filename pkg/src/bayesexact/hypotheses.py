"""Events on the probability simplex used as discovery / non-discovery sets.

Each event has a scalar form that follows its definition literally (odds
ratios, gamma, conditional CDFs) and a compiled batch form that evaluates
many draws at once by cross-multiplication.  All events are invariant to
rescaling the cell array, so raw counts can be passed in place of plug-in
probabilities.

Inequality conventions: the Simpson event is strict, the epsilon-null,
concordance and positive-dependence events are inclusive.  An odds ratio
of 0/0 makes the Simpson and epsilon-null events false.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import IndeterminateOddsRatio, ShapeMismatch, ZeroRowMass
from .tables import as_weights, concordance_sums, odds_ratios_222


def simpson_event(p) -> bool:
    """Both conditional YZ odds ratios below 1 and the marginal one above 1."""
    try:
        cond1, cond2, marg = odds_ratios_222(p)
    except IndeterminateOddsRatio:
        return False
    return cond1 < 1 and cond2 < 1 and marg > 1


def epsilon_null_event(p, epsilon: float = 0.1) -> bool:
    """Both conditional log odds ratios within [-epsilon, epsilon]."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    try:
        cond1, cond2, _ = odds_ratios_222(p)
    except IndeterminateOddsRatio:
        return False
    for theta in (cond1, cond2):
        if theta == 0 or math.isinf(theta) or abs(math.log(theta)) > epsilon:
            return False
    return True


def concordance_event(p) -> bool:
    """Pi_C >= Pi_D, i.e. gamma >= 0 (true when both are zero)."""
    conc, disc = concordance_sums(as_weights(p))
    return bool(conc >= disc)


def positive_dependence_event(p) -> bool:
    """Column distributions given the row are stochastically increasing.

    Checks F(j | i) >= F(j | i+1) for adjacent rows and every cutpoint
    j < C, with F the conditional CDF over columns.
    """
    w = as_weights(p)
    if w.ndim != 2:
        raise ShapeMismatch(f"expected a two-way table, got shape {w.shape}")
    row_mass = w.sum(axis=1)
    if np.any(row_mass <= 0):
        raise ZeroRowMass("a row has zero probability")
    cdf = np.cumsum(w, axis=1)[:, :-1] / row_mass[:, None]
    return bool(np.all(cdf[:-1] >= cdf[1:]))


# ----------------------------------------------------------- batch kernels


@njit(cache=True)
def _simpson_batch(d, eps):
    n = d.shape[0]
    out = np.empty(n, np.bool_)
    for r in range(n):
        p = d[r]
        m00 = p[0] + p[4]
        m01 = p[1] + p[5]
        m10 = p[2] + p[6]
        m11 = p[3] + p[7]
        out[r] = (p[0] * p[3] < p[1] * p[2]) and (p[4] * p[7] < p[5] * p[6]) \
            and (m00 * m11 > m01 * m10)
    return out


@njit(cache=True)
def _abs_log_or_within(a, b, eps):
    if a == 0.0 or b == 0.0:
        return False
    return abs(np.log(a / b)) <= eps


@njit(cache=True)
def _epsilon_null_batch(d, eps):
    n = d.shape[0]
    out = np.empty(n, np.bool_)
    for r in range(n):
        p = d[r]
        out[r] = _abs_log_or_within(p[0] * p[3], p[1] * p[2], eps) and \
            _abs_log_or_within(p[4] * p[7], p[5] * p[6], eps)
    return out


@njit(cache=True)
def _concordance_batch(d, shape):
    R, C = shape[0], shape[1]
    n = d.shape[0]
    out = np.empty(n, np.bool_)
    below = np.empty(C)
    for r in range(n):
        p = d[r]
        below[:] = 0.0
        conc = 0.0
        disc = 0.0
        for i in range(R - 1, -1, -1):
            base = i * C
            if i < R - 1:
                right = 0.0
                for j in range(C - 1, -1, -1):
                    conc += p[base + j] * right
                    right += below[j]
                left = 0.0
                for j in range(C):
                    disc += p[base + j] * left
                    left += below[j]
            for j in range(C):
                below[j] += p[base + j]
        out[r] = conc >= disc
    return out


@njit(cache=True)
def _positive_dependence_batch(d, shape):
    R, C = shape[0], shape[1]
    n = d.shape[0]
    out = np.empty(n, np.bool_)
    rows = np.empty(R)
    for r in range(n):
        p = d[r]
        for i in range(R):
            s = 0.0
            for j in range(C):
                s += p[i * C + j]
            rows[i] = s
        ok = True
        for i in range(R - 1):
            a = 0.0
            b = 0.0
            for j in range(C - 1):
                a += p[i * C + j]
                b += p[(i + 1) * C + j]
                if a * rows[i + 1] < b * rows[i]:
                    ok = False
                    break
            if not ok:
                break
        out[r] = ok
    return out


def _always_batch(d, _arg):
    return np.ones(d.shape[0], dtype=bool)


def _always(p, **_params):
    return True


@dataclass(frozen=True)
class EventPredicate:
    """A named event with its parameters.

    ``evaluate`` works on one cell array (or ProbabilityVector / table);
    ``evaluate_batch`` on a (n, cells) array of flattened draws.
    """

    name: str
    params: dict = field(default_factory=dict)
    negate: bool = False

    def _scalar(self):
        return _SCALAR[self.name]

    def evaluate(self, p) -> bool:
        if self.name in ("simpson", "epsilon_null"):
            shape = as_weights(p).shape
            if shape != (2, 2, 2):
                raise ShapeMismatch(f"{self.name} needs a 2x2x2 table, got {shape}")
        result = bool(self._scalar()(p, **self.params))
        return result != self.negate

    __call__ = evaluate

    def evaluate_batch(self, draws: np.ndarray, shape: tuple) -> np.ndarray:
        draws = np.ascontiguousarray(draws, dtype=np.float64)
        if self.name == "simpson":
            out = _simpson_batch(draws, 0.0)
        elif self.name == "epsilon_null":
            out = _epsilon_null_batch(draws, float(self.params.get("epsilon", 0.1)))
        elif self.name == "concordance":
            out = _concordance_batch(draws, np.array(shape, np.int64))
        elif self.name == "positive_dependence":
            out = _positive_dependence_batch(draws, np.array(shape, np.int64))
        elif self.name == "always":
            out = _always_batch(draws, None)
        else:
            raise KeyError(self.name)
        return ~out if self.negate else out

    def complement(self) -> "EventPredicate":
        return EventPredicate(self.name, dict(self.params), not self.negate)

    def describe(self) -> dict:
        return {"event": self.name, "params": dict(self.params), "complement": self.negate}


_SCALAR = {
    "simpson": simpson_event,
    "epsilon_null": epsilon_null_event,
    "concordance": concordance_event,
    "positive_dependence": positive_dependence_event,
    "always": _always,
}

SIMPSON = EventPredicate("simpson")
CONCORDANCE = EventPredicate("concordance")
POSITIVE_DEPENDENCE = EventPredicate("positive_dependence")
ALWAYS = EventPredicate("always")


def epsilon_null(epsilon: float = 0.1) -> EventPredicate:
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    return EventPredicate("epsilon_null", {"epsilon": float(epsilon)})
