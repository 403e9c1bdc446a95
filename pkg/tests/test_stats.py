import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate
from scipy import special
from scipy import stats as sps

from riskstrat.stats import (
    DegenerateTestError,
    TestKind,
    TestMethod,
    chi_square_sf,
    logrank_test,
    normal_sf,
    pairwise_pvalues,
    regularized_gamma_q,
    u_test,
)
from riskstrat.survival import CovariateSchema, Dataset

from oracles import logrank_p, logrank_statistic, permutation_logrank_p, two_proportion_z


def _group(times, events=None):
    times = np.asarray(times, float)
    schema = CovariateSchema.binary(["x"])
    return Dataset(schema, np.zeros((len(times), 1), np.int64), times, events)


def test_method_invariants():
    with pytest.raises(ValueError):
        TestMethod(TestKind.UTEST, None)
    assert TestMethod.utest(5).t_star == 5
    assert TestMethod.logrank().kind is TestKind.LOGRANK


# tail functions


def test_chi_square_examples():
    assert chi_square_sf(0, 1) == 1.0
    assert chi_square_sf(3.841459, 1) == pytest.approx(0.05, abs=1e-4)
    assert chi_square_sf(6.634897, 1) == pytest.approx(0.01, abs=1e-4)
    with pytest.raises(ValueError):
        chi_square_sf(-1, 1)


def test_chi_square_against_numeric_integration():
    for df in (1, 2, 3, 5):
        pdf = lambda u: u ** (df / 2 - 1) * math.exp(-u / 2) / (2 ** (df / 2) * math.gamma(df / 2))
        for x in (0.1, 1.0, 3.841459, 10.0, 30.0):
            ref, _ = integrate.quad(pdf, x, np.inf, epsabs=1e-13, epsrel=1e-13)
            assert chi_square_sf(x, df) == pytest.approx(ref, abs=1e-10)


def test_regularized_gamma_q_matches_scipy():
    for a in (0.5, 1.0, 2.5, 10.0):
        for x in (0.01, 0.5, 3.0, 12.0, 50.0):
            assert regularized_gamma_q(a, x) == pytest.approx(float(special.gammaincc(a, x)), abs=1e-12)


def test_normal_examples():
    assert normal_sf(0) == 0.5
    assert normal_sf(1.959964) == pytest.approx(0.025, abs=1e-6)
    assert normal_sf(-40) == 1.0
    ref, _ = integrate.quad(lambda u: math.exp(-u * u / 2) / math.sqrt(2 * math.pi), 1.959964, np.inf)
    assert normal_sf(1.959964) == pytest.approx(ref, abs=1e-12)


def test_tail_functions_strictly_decreasing():
    xs = np.linspace(0, 40, 400)
    chi = [chi_square_sf(x, 1) for x in xs]
    assert all(a > b for a, b in zip(chi, chi[1:]))
    zs = np.linspace(-8, 8, 400)
    nor = [normal_sf(z) for z in zs]
    assert all(a > b for a, b in zip(nor, nor[1:]))


# log-rank


def test_logrank_identical_groups():
    r = logrank_test([1, 2, 3], [1, 2, 3])
    assert r.statistic == 0.0 and r.p_value == 1.0


def test_logrank_separated_groups():
    r = logrank_test([1, 2, 3], [10, 20, 30])
    assert r.p_value < 0.05
    assert r.p_value == pytest.approx(logrank_p([1, 2, 3], [1] * 3, [10, 20, 30], [1] * 3), rel=1e-9)


def test_logrank_separated_groups_permutation_oracle():
    # with three per group the smallest attainable permutation p-value is 2/20
    assert permutation_logrank_p([1, 2, 3], [10, 20, 30]) == pytest.approx(0.1)


def test_logrank_interleaved_groups():
    r = logrank_test([1, 3], [2, 4])
    assert r.p_value > 0.3
    assert permutation_logrank_p([1, 3], [2, 4]) > 0.3


def test_logrank_degenerate_and_empty():
    with pytest.raises(DegenerateTestError, match="degenerate test"):
        logrank_test([1, 2], [3], [False, False], [False])
    with pytest.raises(ValueError):
        logrank_test([], [1])


def test_logrank_zero_variance():
    # the only event happens when a single subject remains at risk
    r = logrank_test([1], [5], [False], [True])
    assert r.statistic == 0.0 and r.p_value == 1.0


censored_group = st.lists(st.tuples(st.integers(1, 15), st.booleans()), min_size=1, max_size=10)


@settings(max_examples=150, deadline=None)
@given(censored_group, censored_group)
def test_logrank_matches_loop_oracle(a, b):
    ta, ea = [float(t) for t, _ in a], [e for _, e in a]
    tb, eb = [float(t) for t, _ in b], [e for _, e in b]
    if not any(ea + eb):
        return
    r = logrank_test(ta, tb, ea, eb)
    assert r.statistic == pytest.approx(logrank_statistic(ta, ea, tb, eb), rel=1e-9, abs=1e-12)
    assert r.p_value == pytest.approx(logrank_p(ta, ea, tb, eb), rel=1e-8, abs=1e-12)
    swapped = logrank_test(tb, ta, eb, ea)
    assert swapped.statistic == pytest.approx(r.statistic, rel=1e-12, abs=1e-12)
    assert swapped.p_value == pytest.approx(r.p_value, rel=1e-12, abs=1e-15)
    # strictly increasing transformation of every time
    f = lambda ts: [math.exp(t / 3) + t**3 for t in ts]
    moved = logrank_test(f(ta), f(tb), ea, eb)
    assert moved.p_value == pytest.approx(r.p_value, rel=1e-12, abs=1e-15)


# U-test


def test_utest_identical_outcomes():
    assert u_test([1, 2, 9], [3, 9, 1], 5).p_value == 1.0
    # all outcomes equal means zero variance
    assert u_test([9, 9], [8, 8], 5).p_value == 1.0


def test_utest_equal_proportions():
    a = [1.0] * 30 + [10.0] * 70
    b = [2.0] * 30 + [12.0] * 70
    assert u_test(a, b, 5).p_value == 1.0


def test_utest_complete_separation_against_fisher():
    r = u_test([1.0] * 50, [10.0] * 50, 5)
    fisher = sps.fisher_exact([[50, 0], [0, 50]]).pvalue
    assert fisher < 1e-6
    assert r.p_value < 1e-6


def test_utest_empty_group():
    with pytest.raises(ValueError):
        u_test([], [1], 5)


def test_utest_counts_only_events_by_t_star():
    # censored at 3 and failure at 7 are both "no event by 5"
    r = u_test([3, 7], [7, 8], 5, [False, True], [True, True])
    assert r.p_value == 1.0


def test_utest_equals_two_proportion_z():
    rng = np.random.default_rng(2024)
    checked = 0
    while checked < 20:
        n_a, n_b = rng.integers(5, 200, size=2)
        k_a, k_b = rng.integers(0, n_a + 1), rng.integers(0, n_b + 1)
        if k_a + k_b in (0, n_a + n_b):
            continue
        a = [1.0] * k_a + [9.0] * (n_a - k_a)
        b = [1.0] * k_b + [9.0] * (n_b - k_b)
        r = u_test(a, b, 5)
        n = n_a + n_b
        z = two_proportion_z(k_a, n_a, k_b, n_b)
        # U counts higher ranks for events, so its sign matches the risk difference
        assert r.statistic == pytest.approx(z * math.sqrt((n - 1) / n), rel=1e-10)
        assert r.p_value == pytest.approx(2 * sps.norm.sf(abs(r.statistic)), rel=1e-9)
        checked += 1


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(1, 10), min_size=1, max_size=12), st.lists(st.integers(1, 10), min_size=1, max_size=12))
def test_utest_symmetric_and_rank_based(a, b):
    r = u_test(a, b, 5)
    s = u_test(b, a, 5)
    assert abs(r.statistic) == pytest.approx(abs(s.statistic))
    assert r.p_value == pytest.approx(s.p_value)
    f = lambda ts: [2.0 * t + 1.0 for t in ts]
    assert u_test(f(a), f(b), 11).p_value == pytest.approx(r.p_value)


# permutation agreement


def test_logrank_never_more_conservative_than_permutation_oracle():
    # at these sizes the chi-square approximation is anti-conservative: an
    # exact rejection always implies an asymptotic one, but not conversely
    rng = np.random.default_rng(7)
    for _ in range(150):
        n_a, n_b = rng.integers(1, 6, size=2)
        ta = list(rng.exponential(1.0, n_a))
        tb = list(rng.exponential(1.0, n_b) / np.exp(rng.uniform(-1.5, 1.5)))
        p = logrank_test(ta, tb).p_value
        perm = permutation_logrank_p(ta, tb)
        for alpha in (0.05, 0.2):
            assert not (perm <= alpha and p > alpha)


# pairwise matrix


def test_pairwise_identical_groups():
    g = _group([1, 2, 3, 4])
    m = pairwise_pvalues([g, g, g], TestMethod.logrank())
    np.testing.assert_array_equal(m, np.ones((3, 3)))


def test_pairwise_extreme_groups():
    early, late = _group([1.0] * 40), _group([50.0] * 40)
    m = pairwise_pvalues([early, late], TestMethod.utest(5))
    assert m.shape == (2, 2)
    assert m[0, 1] == m[1, 0] < 1e-6
    assert m[0, 0] == m[1, 1] == 1.0


def test_pairwise_degenerate_pair_is_one():
    none = _group([3, 4], [False, False])
    m = pairwise_pvalues([none, none], TestMethod.logrank())
    assert m[0, 1] == 1.0


def test_pairwise_needs_two_groups():
    with pytest.raises(ValueError):
        pairwise_pvalues([_group([1])], TestMethod.logrank())
