"""Conditional null distributions for tables with fixed margins.

Two sample spaces are supported:

* stratified 2x2 layers with both margins of every layer fixed, where each
  layer is a hypergeometric draw and a sample point is the tuple of
  top-left cells, one per layer;
* a single R x C table with fixed row and column sums, distributed as the
  multivariate hypergeometric.

Probabilities are computed in log space from a shared log-factorial table.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from . import _kernels
from ._parallel import default_workers
from .errors import InconsistentMargins, ShapeMismatch
from .tables import ContingencyTable

_LOG_FACT = gammaln(np.arange(1025, dtype=np.float64) + 1.0)


def log_factorial_table(n: int) -> np.ndarray:
    """Array of log(k!) for k = 0..n (at least), grown on demand."""
    global _LOG_FACT
    if n >= _LOG_FACT.shape[0]:
        size = max(n + 1, 2 * _LOG_FACT.shape[0])
        _LOG_FACT = gammaln(np.arange(size, dtype=np.float64) + 1.0)
    return _LOG_FACT


def hypergeom_log_pmf(x: int, m: int, n: int, k: int) -> float:
    """log P(X = x) for X the number of successes in k draws without
    replacement from m successes and n failures.  Returns -inf off support."""
    if k < 0 or k > m + n or x < max(0, k - n) or x > min(k, m):
        return -math.inf
    lf = log_factorial_table(m + n)
    return float(
        lf[m] - lf[x] - lf[m - x]
        + lf[n] - lf[k - x] - lf[n - k + x]
        - lf[m + n] + lf[k] + lf[m + n - k]
    )


# ---------------------------------------------------------------- stratified


@dataclass(frozen=True)
class StratifiedMargins:
    """Row sums ``rows[s] = (n_s1+, n_s2+)`` and column sums
    ``cols[s] = (n_s+1, n_s+2)`` of each 2x2 stratum."""

    rows: tuple
    cols: tuple

    def __post_init__(self):
        rows = tuple(tuple(int(v) for v in r) for r in self.rows)
        cols = tuple(tuple(int(v) for v in c) for c in self.cols)
        if len(rows) != len(cols) or not rows:
            raise InconsistentMargins("need matching, nonempty row and column margins")
        for r, c in zip(rows, cols):
            if len(r) != 2 or len(c) != 2:
                raise InconsistentMargins("each stratum must be 2x2")
            if min(r + c) < 0 or sum(r) != sum(c):
                raise InconsistentMargins(f"stratum rows {r} and columns {c} disagree")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)

    @classmethod
    def from_table(cls, table: ContingencyTable) -> "StratifiedMargins":
        if table.ndim != 3 or table.shape[1:] != (2, 2):
            raise ShapeMismatch(f"expected S x 2 x 2 counts, got {table.shape}")
        return cls(table.row_sums.tolist(), table.col_sums.tolist())

    def ranges(self) -> list:
        out = []
        for (m, n), (k, _) in zip(self.rows, self.cols):
            out.append(range(max(0, k - n), min(k, m) + 1))
        return out


def stratified_point(table: ContingencyTable) -> tuple:
    """Sample point (top-left cell of every stratum) of a stratified table."""
    return tuple(int(v) for v in table.counts[:, 0, 0])


def stratified_table(point, margins: StratifiedMargins) -> ContingencyTable:
    """Full S x 2 x 2 table implied by a sample point and its margins."""
    layers = []
    for x, (r1, r2), (c1, _) in zip(point, margins.rows, margins.cols):
        layers.append([[x, r1 - x], [c1 - x, r2 - c1 + x]])
    return ContingencyTable(np.array(layers))


def stratified_null_log_pmf(point, margins: StratifiedMargins) -> float:
    total = 0.0
    for x, (m, n), (k, _) in zip(point, margins.rows, margins.cols):
        total += hypergeom_log_pmf(int(x), m, n, k)
    return total


def stratified_null_pmf(point, margins: StratifiedMargins) -> float:
    """Null probability of a point: the product of independent per-stratum
    hypergeometric probabilities (0 off support)."""
    if len(point) != len(margins.rows):
        raise ShapeMismatch("point and margins have different numbers of strata")
    return math.exp(stratified_null_log_pmf(point, margins))


def enumerate_stratified_space(margins: StratifiedMargins) -> list:
    """All sample points, in lexicographic order."""
    return list(itertools.product(*margins.ranges()))


# ----------------------------------------------------------------------- RxC


@dataclass(frozen=True)
class RxCMargins:
    rows: tuple
    cols: tuple

    def __post_init__(self):
        rows = tuple(int(v) for v in self.rows)
        cols = tuple(int(v) for v in self.cols)
        if not rows or not cols:
            raise InconsistentMargins("margins must be nonempty")
        if min(rows + cols) < 0:
            raise InconsistentMargins("margins must be nonnegative")
        if sum(rows) != sum(cols):
            raise InconsistentMargins(f"row total {sum(rows)} != column total {sum(cols)}")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)

    @classmethod
    def from_table(cls, table: ContingencyTable) -> "RxCMargins":
        if table.ndim != 2:
            raise ShapeMismatch(f"expected a two-way table, got shape {table.shape}")
        return cls(table.row_sums.tolist(), table.col_sums.tolist())

    @property
    def total(self) -> int:
        return sum(self.rows)

    @property
    def shape(self) -> tuple:
        return (len(self.rows), len(self.cols))

    def matches(self, table: ContingencyTable) -> bool:
        return (
            table.ndim == 2
            and tuple(table.row_sums.tolist()) == self.rows
            and tuple(table.col_sums.tolist()) == self.cols
        )

    def log_const(self) -> float:
        lf = log_factorial_table(self.total)
        return float(sum(lf[r] for r in self.rows) + sum(lf[c] for c in self.cols) - lf[self.total])


def rxc_log_pmf(table: ContingencyTable) -> float:
    """Multivariate hypergeometric log probability of a table given its own
    margins: log( prod r_i! prod c_j! / (n! prod N_ij!) )."""
    margins = RxCMargins.from_table(table)
    lf = log_factorial_table(margins.total)
    return margins.log_const() - float(lf[table.counts].sum())


def rxc_pmf(table: ContingencyTable) -> float:
    return math.exp(rxc_log_pmf(table))


def first_row_compositions(margins: RxCMargins) -> np.ndarray:
    """Admissible first rows in enumeration order, one per line.

    These are the units of work splitting for enumeration.
    """
    rows, cols = margins.rows, margins.cols
    below = sum(rows[1:])
    out = []

    def rec(j, need, prefix):
        if j == len(cols) - 1:
            if need <= cols[j] and cols[j] - need <= below:
                out.append(prefix + [need])
            return
        right = sum(cols[j + 1:])
        lo = max(0, need - right, cols[j] - below)
        for v in range(lo, min(need, cols[j]) + 1):
            rec(j + 1, need - v, prefix + [v])

    rec(0, rows[0], [])
    return np.array(out, dtype=np.int64).reshape(-1, len(cols))


def _partition_slice(n_items: int, partition):
    if partition is None:
        return slice(0, n_items)
    k, parts = partition
    if not 0 <= k < parts:
        raise ValueError(f"partition index {k} out of range for {parts} parts")
    return slice(n_items * k // parts, n_items * (k + 1) // parts)


def iter_tables(margins: RxCMargins, partition=None):
    """Yield every table (as an int64 array) with the given margins.

    Order is lexicographic in the cells filled row by row; ``partition=(k, K)``
    restricts to the k-th of K contiguous blocks of first rows.  The yielded
    array is reused between iterations.
    """
    rows, cols = margins.rows, margins.cols
    R, C = len(rows), len(cols)
    firsts = first_row_compositions(margins)
    firsts = firsts[_partition_slice(len(firsts), partition)]
    below = [sum(rows[i + 1:]) for i in range(R)]
    table = np.zeros((R, C), dtype=np.int64)

    def fill(i, j, rowrem, colrem):
        if i == R - 1:
            table[i] = colrem
            yield table
            return
        if j == C - 1:
            table[i, j] = rowrem
            colrem[j] -= rowrem
            yield from fill(i + 1, 0, rows[i + 1] if i + 1 < R else 0, colrem)
            colrem[j] += rowrem
            return
        right = sum(colrem[j + 1:])
        lo = max(0, rowrem - right, colrem[j] - below[i])
        for v in range(lo, min(rowrem, colrem[j]) + 1):
            table[i, j] = v
            colrem[j] -= v
            yield from fill(i, j + 1, rowrem - v, colrem)
            colrem[j] += v

    for first in firsts:
        table[0] = first
        colrem = [c - f for c, f in zip(cols, first)]
        if R == 1:
            yield table
        else:
            yield from fill(1, 0, rows[1], colrem)


def rxc_enumerate(margins: RxCMargins, visitor, partition=None) -> int:
    """Call ``visitor(table)`` once for every table with the given margins and
    return how many tables were visited.  Tables are streamed, never stored."""
    n = 0
    for arr in iter_tables(margins, partition):
        visitor(ContingencyTable(arr.copy()))
        n += 1
    return n


def _count_python(rows, cols) -> int:
    """Exact arbitrary-precision count, row-by-row DP over remaining columns."""
    states = {tuple(cols): 1}
    for r in rows[:-1]:
        nxt: dict = {}
        for colrem, ways in states.items():
            for x in _bounded_vectors(r, colrem):
                key = tuple(c - v for c, v in zip(colrem, x))
                nxt[key] = nxt.get(key, 0) + ways
        states = nxt
    return sum(states.values())


def _bounded_vectors(total, bounds):
    if len(bounds) == 1:
        if total <= bounds[0]:
            yield (total,)
        return
    rest = sum(bounds[1:])
    for v in range(max(0, total - rest), min(total, bounds[0]) + 1):
        for tail in _bounded_vectors(total - v, bounds[1:]):
            yield (v,) + tail


_DENSE_LIMIT = 20_000_000


def rxc_count(margins: RxCMargins) -> int:
    """Number of tables with the given margins, without visiting them."""
    rows, cols = margins.rows, margins.cols
    # the count is symmetric under transposition; pick the smaller state box
    if math.prod(r + 1 for r in rows) < math.prod(c + 1 for c in cols):
        rows, cols = cols, rows
    if math.prod(c + 1 for c in cols) <= _DENSE_LIMIT:
        exact, shadow = _kernels.count_dense(np.array(rows, np.int64), np.array(cols, np.int64))
        if shadow < 2.0**62 and abs(exact - shadow) <= 1e-9 * max(shadow, 1.0):
            return int(exact)
    return _count_python(rows, cols)


def rxc_sample_many(margins: RxCMargins, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``size`` tables from the fixed-margins multivariate hypergeometric.

    Rows are filled in turn; each row is a multivariate hypergeometric draw of
    its total from the remaining column counts, realised cell by cell as
    univariate hypergeometric draws.  Returns an int64 array (size, R, C).
    """
    rows, cols = margins.rows, margins.cols
    R, C = len(rows), len(cols)
    out = np.zeros((size, R, C), dtype=np.int64)
    colrem = np.tile(np.array(cols, dtype=np.int64), (size, 1))
    for i in range(R - 1):
        need = np.full(size, rows[i], dtype=np.int64)
        rest = colrem.sum(axis=1)
        for j in range(C - 1):
            rest = rest - colrem[:, j]
            x = rng.hypergeometric(colrem[:, j], rest, need)
            out[:, i, j] = x
            colrem[:, j] -= x
            need -= x
        out[:, i, C - 1] = need
        colrem[:, C - 1] -= need
    out[:, R - 1, :] = colrem
    return out


def rxc_sample(margins: RxCMargins, rng: np.random.Generator) -> ContingencyTable:
    return ContingencyTable(rxc_sample_many(margins, 1, rng)[0])


# ------------------------------------------------------- compiled enumeration


@dataclass(frozen=True)
class TailResult:
    n_tables: int
    n_qualifying: int
    tail_probability: float
    total_probability: float


def _tail_chunk(args):
    rows, cols, firsts, log_const, stat, observed = args
    lf = log_factorial_table(int(rows.sum()))
    return _kernels.tail_kernel(rows, cols, firsts, lf, log_const, stat, observed)


def enumerate_tail(margins: RxCMargins, stat=None, observed: float = math.inf,
                   workers: int | None = None, chunks: int | None = None) -> TailResult:
    """Stream all tables through a compiled statistic.

    ``stat`` is a numba-jitted function of an int64 (R, C) array returning a
    float (default: a constant).  Every first-row composition is a unit of
    work; per-unit sums are combined with ``math.fsum`` in a fixed order, so
    the result does not depend on ``workers`` or ``chunks``.
    """
    stat = _kernels.zero_stat if stat is None else stat
    rows = np.array(margins.rows, np.int64)
    cols = np.array(margins.cols, np.int64)
    firsts = first_row_compositions(margins)
    log_const = margins.log_const()
    R, C = margins.shape
    if C == 1 or R == 1:
        table = np.array(margins.rows if C == 1 else margins.cols, np.int64).reshape(R, C)
        hit = stat(table) >= observed
        return TailResult(1, int(hit), 1.0 if hit else 0.0, 1.0)
    workers = default_workers() if workers is None else workers
    chunks = chunks or max(1, workers * 4)
    bounds = [len(firsts) * k // chunks for k in range(chunks + 1)]
    jobs = [(rows, cols, firsts[a:b], log_const, stat, float(observed))
            for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_tail_chunk, jobs))
    else:
        parts = [_tail_chunk(job) for job in jobs]
    per_first = np.concatenate(parts)
    return TailResult(
        n_tables=int(round(math.fsum(per_first[:, 0]))),
        n_qualifying=int(round(math.fsum(per_first[:, 1]))),
        tail_probability=min(1.0, math.fsum(per_first[:, 3])),
        total_probability=math.fsum(per_first[:, 2]),
    )
