"""Contingency tables, cell-probability vectors and their functionals.

Counts are stored as read-only ``int64`` arrays; probability vectors as
read-only ``float64`` arrays.  Both are immutable after construction.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Union

import numpy as np

from .errors import (
    EmptyTable,
    GammaUndefined,
    IndeterminateOddsRatio,
    InputError,
    NegativeCount,
    ParseError,
    ShapeMismatch,
)

SIMPLEX_TOL = 1e-12


def _frozen(arr):
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ContingencyTable:
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.dtype.kind not in "iu":
            if not np.all(np.equal(np.mod(counts, 1), 0)):
                raise InputError("counts must be integers")
        counts = counts.astype(np.int64)
        if np.any(counts < 0):
            raise NegativeCount(f"negative count in {counts.ravel().tolist()}")
        object.__setattr__(self, "counts", _frozen(counts))

    @property
    def shape(self) -> tuple:
        return self.counts.shape

    @property
    def ndim(self) -> int:
        return self.counts.ndim

    @cached_property
    def total(self) -> int:
        return int(self.counts.sum())

    @cached_property
    def row_sums(self) -> np.ndarray:
        """Sums over the last axis (per stratum for 3-D tables)."""
        return _frozen(self.counts.sum(axis=-1))

    @cached_property
    def col_sums(self) -> np.ndarray:
        """Sums over the second-to-last axis (per stratum for 3-D tables)."""
        return _frozen(self.counts.sum(axis=-2))

    def key(self) -> tuple:
        return self.shape + tuple(self.counts.ravel().tolist())

    def __eq__(self, other):
        if not isinstance(other, ContingencyTable):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.counts, other.counts)

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"ContingencyTable({self.counts.tolist()})"


@dataclass(frozen=True, eq=False)
class ProbabilityVector:
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.size == 0:
            raise InputError("empty probability vector")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise InputError("probabilities must be finite and nonnegative")
        if abs(values.sum() - 1.0) > SIMPLEX_TOL:
            raise InputError(f"probabilities sum to {values.sum()!r}, not 1")
        object.__setattr__(self, "values", _frozen(values))

    @property
    def shape(self) -> tuple:
        return self.values.shape

    def __repr__(self):
        return f"ProbabilityVector({self.values.tolist()})"


class OddsRatioSet(NamedTuple):
    theta_yz_given_x1: float
    theta_yz_given_x2: float
    theta_yz_marginal: float


class ConcordancePair(NamedTuple):
    pi_c: float
    pi_d: float


ArrayLike = Union[ProbabilityVector, ContingencyTable, np.ndarray]


def as_weights(p: ArrayLike) -> np.ndarray:
    """Return the cell array behind ``p``.

    Tables give their raw counts.  The event functionals below are invariant
    to rescaling, so counts can stand in for plug-in probabilities and keep
    integer arithmetic exact.
    """
    if isinstance(p, ProbabilityVector):
        return p.values
    if isinstance(p, ContingencyTable):
        return p.counts
    return np.asarray(p)


def validate_table(raw_counts, shape) -> ContingencyTable:
    flat = np.asarray(raw_counts).ravel()
    shape = tuple(int(s) for s in shape)
    if any(s < 1 for s in shape) or flat.size != int(np.prod(shape)):
        raise ShapeMismatch(f"{flat.size} counts do not fill shape {list(shape)}")
    return ContingencyTable(flat.reshape(shape))


def plugin_probs(table: ContingencyTable) -> ProbabilityVector:
    if table.total == 0:
        raise EmptyTable("cannot form plug-in probabilities of an empty table")
    return ProbabilityVector(table.counts / table.total)


def _ratio(num, den):
    if den == 0:
        if num == 0:
            raise IndeterminateOddsRatio("odds ratio is 0/0")
        return np.inf
    return num / den


def odds_ratios_222(p: ArrayLike) -> OddsRatioSet:
    """Conditional YZ odds ratios in each X stratum and the marginal YZ ratio.

    A zero numerator over a positive denominator gives 0; a positive
    numerator over a zero denominator gives ``inf``.
    """
    w = as_weights(p)
    if w.shape != (2, 2, 2):
        raise ShapeMismatch(f"expected shape (2, 2, 2), got {w.shape}")
    w = w.astype(np.float64) if w.dtype.kind == "f" else w.astype(object)
    m = w[0] + w[1]
    return OddsRatioSet(
        float(_ratio(w[0, 0, 0] * w[0, 1, 1], w[0, 0, 1] * w[0, 1, 0])),
        float(_ratio(w[1, 0, 0] * w[1, 1, 1], w[1, 0, 1] * w[1, 1, 0])),
        float(_ratio(m[0, 0] * m[1, 1], m[0, 1] * m[1, 0])),
    )


def _require_2d(w):
    if w.ndim != 2:
        raise ShapeMismatch(f"expected a two-way table, got shape {w.shape}")


def concordance_sums(w: np.ndarray):
    """Unnormalized concordant and discordant pair masses of a two-way array.

    Returns ``(C, D)`` with ``C = sum_ij w_ij * sum_{h>i, k>j} w_hk`` and
    ``D = sum_ij w_ij * sum_{h>i, k<j} w_hk``.  Integer input stays integer.
    """
    w = np.asarray(w)
    _require_2d(w)
    r, c = w.shape
    # below_right[i, j] = sum over h >= i, k >= j
    below_right = w[::-1, ::-1].cumsum(0).cumsum(1)[::-1, ::-1]
    below_left = w[::-1, :].cumsum(0).cumsum(1)[::-1, :]
    conc = (w[:-1, :-1] * below_right[1:, 1:]).sum() if r > 1 and c > 1 else 0
    disc = (w[:-1, 1:] * below_left[1:, :-1]).sum() if r > 1 and c > 1 else 0
    return conc, disc


def concordance_probs(p: ArrayLike) -> ConcordancePair:
    w = as_weights(p)
    _require_2d(w)
    conc, disc = concordance_sums(w)
    scale = float(w.sum()) ** 2
    return ConcordancePair(2.0 * float(conc) / scale, 2.0 * float(disc) / scale)


def gamma(p: ArrayLike) -> float:
    """Goodman-Kruskal (Kendall) gamma, ``(C - D) / (C + D)``.

    Raises GammaUndefined when there are no concordant or discordant pairs.
    Integer tables are evaluated from exact pair counts, so equal rational
    values always compare equal.
    """
    w = as_weights(p)
    _require_2d(w)
    conc, disc = concordance_sums(w)
    if conc + disc == 0:
        raise GammaUndefined("no concordant or discordant pairs")
    return float(conc - disc) / float(conc + disc)


def gamma_hat(table: ContingencyTable) -> float | None:
    """Sample gamma of a table, or None when it is undefined."""
    try:
        return gamma(table)
    except GammaUndefined:
        return None


_SPLIT = re.compile(r"[,\s]+")


def parse_table_text(text: str) -> ContingencyTable:
    """Parse the plain-text table format.

    Lines starting with ``#`` are comments.  Rows hold integers separated by
    commas and/or whitespace.  Blank lines separate strata; a single block
    is an R x C table, several equal-shaped blocks form an S x R x C table.
    """
    blocks, current = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if stripped.startswith("#"):
            continue
        if not stripped:
            if current:
                blocks.append(current)
                current = []
            continue
        try:
            row = [int(tok) for tok in _SPLIT.split(stripped) if tok]
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}") from None
        current.append(row)
    if current:
        blocks.append(current)
    if not blocks:
        raise ParseError("no table rows found")
    width = len(blocks[0][0])
    height = len(blocks[0])
    for block in blocks:
        if len(block) != height or any(len(row) != width for row in block):
            raise ParseError("rows or strata have inconsistent lengths")
    arr = np.array(blocks, dtype=np.int64)
    if len(blocks) == 1:
        arr = arr[0]
    return ContingencyTable(arr)


def read_table(path) -> ContingencyTable:
    with open(path) as fh:
        return parse_table_text(fh.read())


def format_table(table: ContingencyTable) -> str:
    counts = table.counts if table.ndim == 3 else table.counts[None]
    blocks = ["\n".join(" ".join(str(v) for v in row) for row in layer) for layer in counts]
    return "\n\n".join(blocks) + "\n"
