"""Power of conditional exact tests under a truncated multinomial alternative,
via importance sampling from the fixed-margins null, plus a Gaussian
example contrasting a likelihood-ratio region with a one-direction region.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import _kernels, seeding
from .engine import PosteriorProbability, evaluate_tables
from .errors import AllZeroWeights, InputError
from .hypotheses import CONCORDANCE
from .nulldist import RxCMargins, log_factorial_table, rxc_log_pmf, rxc_sample_many
from .posterior import DEFAULT_PRIOR
from .tables import ContingencyTable, ProbabilityVector, as_weights

JOB_SATISFACTION = ((1, 3, 10, 6), (2, 3, 10, 7), (1, 6, 14, 12), (0, 1, 9, 11))


# ----------------------------------------------------------------- weights


def multinomial_log_pmf(table: ContingencyTable, probs) -> float:
    p = as_weights(probs).ravel()
    n = table.counts.ravel()
    if np.any((p == 0) & (n > 0)):
        return -math.inf
    lf = log_factorial_table(table.total)
    pos = n > 0
    return float(lf[table.total] - lf[n].sum() + np.sum(n[pos] * np.log(p[pos])))


def importance_weights(proposal: ContingencyTable, alternative) -> float:
    """Alternative multinomial pmf over the fixed-margins null pmf."""
    return math.exp(multinomial_log_pmf(proposal, alternative) - rxc_log_pmf(proposal))


def log_importance_weights(tables: np.ndarray, margins: RxCMargins, alternative) -> np.ndarray:
    """Vectorized log weights for a stack of tables sharing ``margins``.

    The per-cell factorials appear in both pmfs and cancel, leaving
    2 log n! - sum log r_i! - sum log c_j! + sum n_ij log p_ij.
    """
    p = as_weights(alternative).reshape(margins.shape)
    tables = np.asarray(tables, dtype=np.int64)
    lf = log_factorial_table(margins.total)
    const = 2 * lf[margins.total] - lf[list(margins.rows)].sum() - lf[list(margins.cols)].sum()
    # 0 * log 0 = 0; a positive count in a zero cell gives -inf
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(tables > 0, tables * np.log(p), 0.0)
    return const + terms.sum(axis=(1, 2))


def weighted_resample(proposals, weights, m: int, rng: np.random.Generator):
    """``m`` with-replacement draws, item k chosen with probability
    weights[k] / sum(weights).  Returns the chosen items as an array."""
    w = np.asarray(weights, dtype=np.float64)
    if m < 1:
        raise InputError("m must be at least 1")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise InputError("weights must be finite and nonnegative")
    total = w.sum()
    if not total > 0:
        raise AllZeroWeights("all importance weights are zero")
    idx = rng.choice(w.size, size=m, replace=True, p=w / total)
    return np.asarray(proposals)[idx]


def _weights_from_logs(logw: np.ndarray) -> np.ndarray:
    if not np.any(np.isfinite(logw)):
        raise AllZeroWeights("all importance weights are zero")
    return np.exp(logw - logw[np.isfinite(logw)].max())


# ------------------------------------------------------------------ config


@dataclass
class PowerStudyConfig:
    rows: tuple
    cols: tuple
    alternative: tuple
    n_proposals: int = 100_000
    n_resample: int = 10_000
    n_null_reference: int = 10_000
    n_posterior: int = 1_000
    seed: int = 0
    alpha_grid: tuple = (0.10, 0.05)
    prior: float = DEFAULT_PRIOR

    def __post_init__(self):
        self.rows = tuple(int(v) for v in self.rows)
        self.cols = tuple(int(v) for v in self.cols)
        for name in ("n_proposals", "n_resample", "n_null_reference", "n_posterior"):
            if int(getattr(self, name)) < 1:
                raise InputError(f"{name} must be at least 1")
            setattr(self, name, int(getattr(self, name)))
        alt = np.asarray(self.alternative, dtype=np.float64)
        if alt.size != len(self.rows) * len(self.cols):
            raise InputError("alternative must have one probability per cell")
        ProbabilityVector(alt)
        self.alternative = tuple(alt.ravel().tolist())
        self.alpha_grid = tuple(float(a) for a in self.alpha_grid)

    @property
    def margins(self) -> RxCMargins:
        return RxCMargins(self.rows, self.cols)

    @classmethod
    def from_table(cls, table: ContingencyTable, **kw) -> "PowerStudyConfig":
        """Alternative = plug-in proportions of ``table``, margins = its margins."""
        alt = (table.counts / table.total).ravel()
        return cls(table.row_sums.tolist(), table.col_sums.tolist(), tuple(alt), **kw)

    @classmethod
    def default(cls, seed: int = 0) -> "PowerStudyConfig":
        return cls.from_table(ContingencyTable(np.array(JOB_SATISFACTION)), seed=seed)

    @classmethod
    def full_scale(cls, seed: int = 0) -> "PowerStudyConfig":
        return cls.from_table(ContingencyTable(np.array(JOB_SATISFACTION)), seed=seed,
                              n_proposals=1_000_000, n_resample=100_000,
                              n_null_reference=100_000, n_posterior=10_000)

    def to_dict(self) -> dict:
        return asdict(self)


# ----------------------------------------------------------------- summary


@dataclass
class ArmSummary:
    mean: float
    mean_se: float
    median: float
    median_se: float
    fraction_below: dict = field(default_factory=dict)
    fraction_below_se: dict = field(default_factory=dict)


@dataclass
class PowerSummary:
    arms: dict
    n_realizations: int
    n_reference: int
    effective_sample_size: float
    wall_clock_seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "arms": {k: asdict(v) for k, v in self.arms.items()},
            "n_realizations": self.n_realizations,
            "n_reference": self.n_reference,
            "effective_sample_size": self.effective_sample_size,
            "wall_clock_seconds": self.wall_clock_seconds,
        }


def reference_p_values(values: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Share of reference values >= each value (ties count against)."""
    ref = np.sort(np.asarray(reference, dtype=np.float64))
    return (ref.size - np.searchsorted(ref, values, side="left")) / ref.size


def _median_se(sorted_p: np.ndarray) -> float:
    # distribution-free: half-width of the order-statistic 95% interval / 1.96
    n = sorted_p.size
    if n < 4:
        return math.nan
    half = 1.96 * math.sqrt(n) / 2
    lo = max(0, int(math.floor(n / 2 - half)))
    hi = min(n - 1, int(math.ceil(n / 2 + half)))
    return float((sorted_p[hi] - sorted_p[lo]) / (2 * 1.96))


def summarize(p_values: np.ndarray, alpha_grid=(0.10, 0.05)) -> ArmSummary:
    p = np.sort(np.asarray(p_values, dtype=np.float64))
    n = p.size
    frac, frac_se = {}, {}
    for a in alpha_grid:
        f = float(np.count_nonzero(p < a) / n)
        frac[f"{a:g}"] = f
        frac_se[f"{a:g}"] = math.sqrt(f * (1 - f) / n)
    return ArmSummary(
        mean=float(p.mean()),
        mean_se=float(p.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan,
        median=float(np.median(p)),
        median_se=_median_se(p),
        fraction_below=frac,
        fraction_below_se=frac_se,
    )


def _statistics(tables: np.ndarray, posterior_stat, seed: int, workers) -> dict:
    return {
        "gamma_hat": _kernels.gamma_many(np.ascontiguousarray(tables, dtype=np.int64)),
        "posterior_concordance": evaluate_tables(tables, posterior_stat, seed, workers),
    }


def power_study(config: PowerStudyConfig, workers=None) -> PowerSummary:
    """Importance-sampled power of the gamma-hat and posterior-concordance
    exact tests under the truncated multinomial alternative.

    Both arms use the same realizations and the same null reference sample.
    Posterior estimates are seeded by table contents, so a table appearing
    both as a realization and in the reference gets the same value.
    """
    start = time.perf_counter()
    margins = config.margins
    proposals = rxc_sample_many(margins, config.n_proposals,
                                seeding.generator(config.seed, seeding.PROPOSALS))
    logw = log_importance_weights(proposals, margins, config.alternative)
    w = _weights_from_logs(logw)
    ess = float(w.sum() ** 2 / np.sum(w * w))
    realizations = weighted_resample(proposals, w, config.n_resample,
                                     seeding.generator(config.seed, seeding.RESAMPLE))
    reference = rxc_sample_many(margins, config.n_null_reference,
                                seeding.generator(config.seed, seeding.REFERENCE))
    post = PosteriorProbability("posterior_concordance", CONCORDANCE, config.n_posterior,
                                config.prior)
    real_stats = _statistics(realizations, post, config.seed, workers)
    ref_stats = _statistics(reference, post, config.seed, workers)
    arms = {}
    for name in real_stats:
        p = reference_p_values(real_stats[name], ref_stats[name])
        arms[name] = summarize(p, config.alpha_grid)
    return PowerSummary(arms, config.n_resample, config.n_null_reference, ess,
                        time.perf_counter() - start)


# ---------------------------------------------------------------- Gaussian


def gaussian_demo(K: int = 100, mu1: float = 3.2, alpha: float = 0.05, n_mc: int = 1_000_000,
                  seed: int = 0, chunk: int = 20_000):
    """Monte Carlo power of two level-alpha regions for y ~ N(mu, I_K),
    mu = (mu1, 0, ..., 0): the chi-square region ||y||^2 >= chi2_{K,1-alpha}
    and the one-sided region y_1 >= z_{1-alpha}.

    Returns (lrt_power, bayes_power).
    """
    if K < 1 or n_mc < 1:
        raise InputError("K and n_mc must be at least 1")
    if not 0 < alpha < 1:
        raise InputError("alpha must lie in (0, 1)")
    chi_crit = stats.chi2.ppf(1 - alpha, K)
    z_crit = stats.norm.ppf(1 - alpha)
    rng = seeding.generator(seed, seeding.GAUSSIAN)
    lrt_hits = bayes_hits = 0
    for start in range(0, n_mc, chunk):
        size = min(chunk, n_mc - start)
        y = rng.standard_normal((size, K))
        y[:, 0] += mu1
        lrt_hits += int(np.count_nonzero(np.einsum("ij,ij->i", y, y) >= chi_crit))
        bayes_hits += int(np.count_nonzero(y[:, 0] >= z_crit))
    return lrt_hits / n_mc, bayes_hits / n_mc


def gaussian_exact_powers(K: int = 100, mu1: float = 3.2, alpha: float = 0.05):
    """Closed forms: noncentral chi-square tail and Phi(mu1 - z_{1-alpha})."""
    chi_crit = stats.chi2.ppf(1 - alpha, K)
    z_crit = stats.norm.ppf(1 - alpha)
    lrt = stats.chi2.sf(chi_crit, K) if mu1 == 0 else stats.ncx2.sf(chi_crit, K, mu1 ** 2)
    return float(lrt), float(stats.norm.cdf(mu1 - z_crit))

