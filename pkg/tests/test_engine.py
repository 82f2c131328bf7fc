import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numba import njit

from bayesexact import _kernels
from bayesexact.analyses import simpson_statistic
from bayesexact.engine import (
    EXACT,
    DeterministicStatistic,
    FiniteModel,
    PosteriorRatio,
    average_risk,
    bayes_region,
    bayes_region_alpha,
    conditional_bayes_region,
    evaluate_space,
    evaluate_tables,
    exact_p_value,
    exact_p_value_enumerated,
    mc_significance,
    mean_power,
    mean_significance,
    rank_key,
)
from bayesexact.errors import EmptyNullEvent, InputError, ObservedNotInSpace
from bayesexact.hypotheses import ALWAYS, CONCORDANCE
from bayesexact.nulldist import RxCMargins, StratifiedMargins, enumerate_stratified_space, iter_tables
from bayesexact.tables import ContingencyTable, gamma_hat

from oracles import all_tables, hypergeometric_pmf, sort_and_sum_p


@njit
def n11(t):
    return float(t[0, 0])


# ------------------------------------------------------------ exact p-values


def test_constant_statistic_gives_one():
    space = list(range(6))
    pmf = [0.1, 0.2, 0.3, 0.1, 0.2, 0.1]
    rep = exact_p_value(space, lambda n: pmf[n], DeterministicStatistic("c", lambda n: 0.0), 3)
    assert rep.p_value == 1.0 and rep.p_value_se == 0.0 and rep.method == EXACT
    assert rep.qualifying_count == 6


def test_observed_not_in_space():
    with pytest.raises(ObservedNotInSpace):
        exact_p_value([1, 2], lambda n: 0.5, lambda n: n, 3)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(-3, 3), min_size=1, max_size=40), st.data())
def test_exact_p_matches_sort_and_sum(values, data):
    w = np.arange(1, len(values) + 1, dtype=float)
    probs = (w / w.sum()).tolist()
    obs = data.draw(st.integers(0, len(values) - 1))
    rep = exact_p_value(list(range(len(values))), lambda n: probs[n], lambda n: values[n], obs)
    assert rep.p_value == pytest.approx(sort_and_sum_p(values, probs, values[obs]), abs=1e-14)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=30), st.data())
def test_exact_p_monotone_in_observed_value(values, data):
    n = len(values)
    probs = [1 / n] * n
    a, b = data.draw(st.integers(0, n - 1)), data.draw(st.integers(0, n - 1))
    if values[a] > values[b]:
        a, b = b, a
    pa = exact_p_value(range(n), lambda k: probs[k], lambda k: values[k], a).p_value
    pb = exact_p_value(range(n), lambda k: probs[k], lambda k: values[k], b).p_value
    assert pb <= pa


def test_undefined_values_rank_lowest():
    assert rank_key(None) == -math.inf and rank_key(float("nan")) == -math.inf
    values = [None, 0.5, -0.5, None]
    rep = exact_p_value(range(4), lambda k: 0.25, lambda k: values[k], 2)
    assert rep.p_value == 0.5
    rep = exact_p_value(range(4), lambda k: 0.25, lambda k: values[k], 0)
    assert rep.p_value == 1.0


def test_enumerated_two_by_two():
    m = RxCMargins([1, 1], [1, 1])
    obs = ContingencyTable([[1, 0], [0, 1]])
    assert exact_p_value_enumerated(m, n11, obs).p_value == pytest.approx(0.5)
    py = exact_p_value_enumerated(m, lambda t: t.counts[0, 0], obs)
    assert py.p_value == pytest.approx(0.5) and py.qualifying_count == 1
    with pytest.raises(ObservedNotInSpace):
        exact_p_value_enumerated(m, n11, ContingencyTable([[2, 0], [0, 1]]))


def _random_table(rng):
    R, C = rng.integers(2, 4, size=2)
    return ContingencyTable(rng.integers(0, 4, size=(R, C)))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_enumerated_matches_brute_force(seed):
    obs = _random_table(np.random.default_rng(seed))
    m = RxCMargins.from_table(obs)
    tables = all_tables(m.rows, m.cols)
    values = [rank_key(gamma_hat(ContingencyTable(t))) for t in tables]
    probs = [float(hypergeometric_pmf(t)) for t in tables]
    expected = sort_and_sum_p(values, probs, rank_key(gamma_hat(obs)))
    compiled = exact_p_value_enumerated(m, _kernels.gamma_stat, obs)
    python = exact_p_value_enumerated(m, gamma_hat, obs)
    assert compiled.p_value == pytest.approx(expected, abs=1e-12)
    assert python.p_value == pytest.approx(expected, abs=1e-12)
    assert compiled.qualifying_count == python.qualifying_count


# ---------------------------------------------------------------- MC levels


def test_mc_significance_observed_minus_inf():
    m = RxCMargins([3, 4], [2, 5])
    rep = mc_significance(m, DeterministicStatistic("g", gamma_hat), -math.inf, 50, seed=1)
    assert rep.p_value == 1.0
    with pytest.raises(InputError):
        mc_significance(m, DeterministicStatistic("g", gamma_hat), 0.0, 0, seed=1)


def test_mc_significance_agrees_with_exact():
    obs = ContingencyTable([[3, 1, 0], [2, 2, 1], [0, 2, 4]])
    m = RxCMargins.from_table(obs)
    exact = exact_p_value_enumerated(m, _kernels.gamma_stat, obs).p_value
    rep = mc_significance(m, DeterministicStatistic("g", gamma_hat), gamma_hat(obs), 20_000, seed=3)
    assert abs(rep.p_value - exact) <= 4 * math.sqrt(exact * (1 - exact) / 20_000)
    assert rep.p_value_se == pytest.approx(math.sqrt(rep.p_value * (1 - rep.p_value) / 20_000))


def test_results_independent_of_worker_count(death_penalty):
    margins = StratifiedMargins.from_table(death_penalty)
    space = enumerate_stratified_space(margins)[100:106]
    stat = simpson_statistic(margins, ratio=True, n_posterior=3000, n_null_event=2000)
    one = evaluate_space(space, stat, seed=8, workers=1)
    two = evaluate_space(space, stat, seed=8, workers=2)
    assert repr(one) == repr(two)
    m = RxCMargins([5, 6, 4], [4, 6, 5])
    from bayesexact.engine import PosteriorProbability
    post = PosteriorProbability("conc", CONCORDANCE, 500)
    a = mc_significance(m, post, 0.6, 200, seed=2, workers=1)
    b = mc_significance(m, post, 0.6, 200, seed=2, workers=2)
    assert (a.p_value, a.qualifying_count) == (b.p_value, b.qualifying_count)


def test_evaluate_tables_equal_tables_equal_values():
    from bayesexact.engine import PosteriorProbability
    post = PosteriorProbability("conc", CONCORDANCE, 300)
    t = np.array([[[1, 2], [3, 4]], [[2, 1], [3, 4]], [[1, 2], [3, 4]]])
    keys = evaluate_tables(t, post, seed=1)
    assert keys[0] == keys[2]


def test_posterior_ratio_zero_denominator(death_penalty):
    never = ALWAYS.complement()
    r = PosteriorRatio("r", ALWAYS, never, 100, 100)(death_penalty, 1)
    assert r.value == math.inf
    r = PosteriorRatio("r", never, never, 100, 100)(death_penalty, 1)
    assert r.value is None


# ------------------------------------------------------------------ regions


def test_bayes_region_thresholds():
    space = ["a", "b", "c", "d", "e"]
    ratios = [0.1, 0.5, 1, 2, 9]
    assert bayes_region(space, ratios, 0) == set(space)
    assert bayes_region(space, ratios, math.inf) == set()
    assert bayes_region(space, ratios, 1) == {"c", "d", "e"}
    assert bayes_region(space, lambda s: ratios[space.index(s)], 2) == {"d", "e"}


def test_bayes_region_alpha_examples():
    space = [0, 1, 2, 3]
    pmf = [0.3, 0.3, 0.2, 0.2]
    ratios = [4, 3, 2, 1]
    region, delta = bayes_region_alpha(space, pmf, ratios, 0.5)
    assert region == {0} and delta == 4
    region, delta = bayes_region_alpha(space, pmf, ratios, 1.0)
    assert region == set(space) and delta == 1
    assert bayes_region_alpha(space, pmf, ratios, 0.0) == (set(), math.inf)
    # tied group that does not fit is left out entirely
    region, delta = bayes_region_alpha(space, pmf, [4, 3, 3, 1], 0.7)
    assert region == {0} and delta == 4
    with pytest.raises(InputError):
        bayes_region_alpha(space, pmf, ratios, 1.5)


def test_conditional_region():
    space = list(range(6))
    pmf = [0.1, 0.2, 0.2, 0.15, 0.25, 0.1]
    ratios = [5, 1, 3, 0, 0, 0]
    single = conditional_bayes_region([(space, pmf)], ratios, 0.3)
    assert single == bayes_region_alpha(space, pmf, ratios, 0.3)[0]
    parts = [([0, 1, 2], [0.1, 0.2, 0.2]), ([3, 4, 5], [0.15, 0.25, 0.1])]
    region = conditional_bayes_region(parts, lambda n: ratios[n], 0.3)
    assert sum(pmf[n] for n in region) <= 0.3 + 1e-12
    # the all-zero-ratio part contributes nothing once the threshold is positive
    assert not region & {3, 4, 5} or bayes_region_alpha([3, 4, 5], [0.3, 0.5, 0.2], [0, 0, 0], 0.3)[1] == 0


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 1), st.floats(0, 1))
def test_region_nesting_and_level(seed, a1, a2):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 30))
    pmf = rng.dirichlet(np.ones(n))
    ratios = rng.choice([0.5, 1.0, 2.0, 3.0, 7.0], size=n) if seed % 2 else rng.exponential(size=n)
    lo, hi = sorted((a1, a2))
    r_lo, _ = bayes_region_alpha(range(n), pmf, ratios, lo)
    r_hi, _ = bayes_region_alpha(range(n), pmf, ratios, hi)
    assert r_lo <= r_hi
    assert math.fsum(pmf[list(r_lo)]) <= lo + 1e-12
    d_lo, d_hi = sorted(rng.exponential(size=2))
    assert bayes_region(range(n), ratios, d_hi) <= bayes_region(range(n), ratios, d_lo)
    cut = int(rng.integers(0, n + 1))
    parts = [(list(range(cut)), pmf[:cut]), (list(range(cut, n)), pmf[cut:])]
    cond = conditional_bayes_region(parts, ratios, lo)
    assert math.fsum(pmf[list(cond)]) <= lo + 1e-12


# ------------------------------------------------------------- finite models


def _subset_matrix(n):
    return ((np.arange(2**n)[:, None] >> np.arange(n)) & 1).astype(bool)


def _random_models(count, seed=0):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        yield FiniteModel.random(rng, int(rng.integers(2, 7)), int(rng.integers(2, 13)))


def test_finite_model_validation():
    with pytest.raises(InputError):
        FiniteModel([0.5, 0.6], [[0.5, 0.5], [0.5, 0.5]], [0, 1])
    with pytest.raises(InputError):
        FiniteModel([0.5, 0.5], [[0.5, 0.6], [0.5, 0.5]], [0, 1])
    m = FiniteModel([1.0], [[0.4, 0.6]], [1])
    with pytest.raises(EmptyNullEvent):
        mean_significance(m, {0})


def test_significance_power_edge_cases():
    m = next(_random_models(1, 4))
    full = set(range(m.n_points))
    assert mean_significance(m, set()) == 0 and mean_power(m, set()) == 0
    assert mean_significance(m, full) == pytest.approx(1) and mean_power(m, full) == pytest.approx(1)
    assert average_risk(m, full, 0, 0) == 0
    assert average_risk(m, set(), 2.0, 3.0) == pytest.approx(3.0 * m.event_prior(1))


def test_finite_model_oracles():
    for m in _random_models(20, 7):
        region = {0, m.n_points - 1}
        p0 = sum(m.prior[k] for k in range(len(m.prior)) if m.labels[k] == 0)
        p1 = sum(m.prior[k] for k in range(len(m.prior)) if m.labels[k] == 1)
        sig = sum(m.prior[k] * m.likelihood[k, n] for k in range(len(m.prior)) if m.labels[k] == 0
                  for n in region) / p0
        pw = sum(m.prior[k] * m.likelihood[k, n] for k in range(len(m.prior)) if m.labels[k] == 1
                 for n in region) / p1
        assert mean_significance(m, region) == pytest.approx(sig, abs=1e-12)
        assert mean_power(m, region) == pytest.approx(pw, abs=1e-12)
        marg = m.marginal()
        risk = sum(marg[n] * 2.0 * m.posterior(0)[n] for n in region)
        risk += sum(marg[n] * 0.5 * m.posterior(1)[n] for n in range(m.n_points) if n not in region)
        assert average_risk(m, region, 2.0, 0.5) == pytest.approx(risk, abs=1e-12)


def test_bayes_region_is_mean_most_powerful_and_risk_minimizing():
    checked = 0
    for m in _random_models(100, 11):
        n = m.n_points
        subsets = _subset_matrix(n)
        j0, j1 = m.joint(0), m.joint(1)
        sig = subsets @ j0 / m.event_prior(0)
        pw = subsets @ j1 / m.event_prior(1)
        ratios = m.ratio()
        finite = sorted(set(r for r in ratios if np.isfinite(r)))
        for delta in [0.0, *finite, math.inf]:
            region = bayes_region(range(n), ratios, delta)
            s_sig, s_pw = mean_significance(m, region), mean_power(m, region)
            ok = sig <= s_sig + 1e-15
            assert pw[ok].max() <= s_pw + 1e-12
            checked += 1
        for lam1, lam2 in [(1.0, 1.0), (1.0, 4.0), (3.0, 1.0), (0.2, 5.0)]:
            region = bayes_region(range(n), ratios, lam1 / lam2)
            risks = lam1 * (subsets @ j0) + lam2 * (j1.sum() - subsets @ j1)
            assert average_risk(m, region, lam1, lam2) <= risks.min() + 1e-12
    assert checked > 100


def test_ratio_and_bayes_factor_orderings_agree():
    for m in _random_models(100, 13):
        r, bf = m.ratio(), m.bayes_factor()
        const = m.event_prior(1) / m.event_prior(0)
        assert np.allclose(r, bf * const, rtol=1e-12)
        for i, j in itertools.combinations(range(m.n_points), 2):
            if abs(r[i] - r[j]) > 1e-9 * max(r[i], r[j]):
                assert (r[i] > r[j]) == (bf[i] > bf[j])
