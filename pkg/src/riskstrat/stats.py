"""Two-sample tests: log-rank for censored data, Mann-Whitney U at a horizon.

The chi-square and normal tail functions are implemented here rather than
pulled from scipy so p-values are reproducible to a documented tolerance.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .survival import Dataset


class DegenerateTestError(ValueError):
    """Raised when a comparison carries no information (e.g. no events)."""


class TestKind(enum.Enum):
    __test__ = False

    LOGRANK = "logrank"
    UTEST = "utest"


@dataclass(frozen=True)
class TestMethod:
    __test__ = False

    kind: TestKind = TestKind.LOGRANK
    t_star: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", TestKind(self.kind))
        if self.kind is TestKind.UTEST and self.t_star is None:
            raise ValueError("the U-test needs t_star")

    @classmethod
    def logrank(cls) -> "TestMethod":
        return cls(TestKind.LOGRANK)

    @classmethod
    def utest(cls, t_star: float) -> "TestMethod":
        return cls(TestKind.UTEST, float(t_star))

    def __str__(self):
        if self.kind is TestKind.UTEST:
            return f"utest(t*={self.t_star:g})"
        return "logrank"


@dataclass(frozen=True)
class TestResult:
    __test__ = False

    statistic: float
    p_value: float
    method: TestMethod
    n_a: int
    n_b: int


_EPS = 1e-16
_TINY = 1e-300


def _gamma_p_series(a: float, x: float) -> float:
    term = total = 1.0 / a
    ap = a
    for _ in range(10_000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_q_contfrac(a: float, x: float) -> float:
    # modified Lentz evaluation of the continued fraction for Q(a, x)
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def regularized_gamma_q(a: float, x: float) -> float:
    """Upper regularized incomplete gamma function Q(a, x)."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return min(1.0, max(0.0, 1.0 - _gamma_p_series(a, x)))
    return min(1.0, max(0.0, _gamma_q_contfrac(a, x)))


def chi_square_sf(x: float, df: int = 1) -> float:
    """P(chi2_df > x)."""
    if x < 0:
        raise ValueError("chi-square statistic must be non-negative")
    if df < 1 or int(df) != df:
        raise ValueError("df must be a positive integer")
    return regularized_gamma_q(df / 2.0, x / 2.0)


def normal_sf(z: float) -> float:
    """P(Z > z) for a standard normal Z."""
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _arrays(time, event):
    time = np.asarray(time, dtype=float).reshape(-1)
    event = np.ones(time.size, bool) if event is None else np.asarray(event, dtype=bool).reshape(-1)
    if time.size != event.size:
        raise ValueError("time and event lengths differ")
    return time, event


def logrank_test(time_a, time_b, event_a=None, event_b=None) -> TestResult:
    """Two-sided two-group log-rank test.

    Tied event times are handled together using the hypergeometric
    variance. Raises :class:`DegenerateTestError` if the pooled sample has
    no events.
    """
    time_a, event_a = _arrays(time_a, event_a)
    time_b, event_b = _arrays(time_b, event_b)
    n_a, n_b = time_a.size, time_b.size
    if n_a == 0 or n_b == 0:
        raise ValueError("empty group")

    event_times = np.unique(np.concatenate([time_a[event_a], time_b[event_b]]))
    if event_times.size == 0:
        raise DegenerateTestError("degenerate test: no events in pooled data")

    sorted_a = np.sort(time_a)
    sorted_b = np.sort(time_b)
    risk_a = n_a - np.searchsorted(sorted_a, event_times, side="left")
    risk_b = n_b - np.searchsorted(sorted_b, event_times, side="left")
    ev_a = np.sort(time_a[event_a])
    ev_b = np.sort(time_b[event_b])
    d_a = np.searchsorted(ev_a, event_times, side="right") - np.searchsorted(ev_a, event_times, side="left")
    d_b = np.searchsorted(ev_b, event_times, side="right") - np.searchsorted(ev_b, event_times, side="left")

    n = (risk_a + risk_b).astype(float)
    d = (d_a + d_b).astype(float)
    frac_a = risk_a / n
    expected_a = d * frac_a
    with np.errstate(invalid="ignore", divide="ignore"):
        var = np.where(n > 1, d * frac_a * (1.0 - frac_a) * (n - d) / (n - 1.0), 0.0)

    diff = float(np.sum(d_a - expected_a))
    total_var = float(np.sum(var))
    if total_var <= 0.0:
        # zero variance forces observed == expected at every event time
        stat = 0.0
    else:
        stat = diff * diff / total_var
    return TestResult(stat, chi_square_sf(stat, 1), TestMethod.logrank(), n_a, n_b)


def event_by(time, event, t_star: float) -> np.ndarray:
    """Binary outcome: failure observed at or before ``t_star``."""
    time, event = _arrays(time, event)
    return event & (time <= t_star)


def u_test(time_a, time_b, t_star: float, event_a=None, event_b=None) -> TestResult:
    """Mann-Whitney U on the event-by-``t_star`` indicator.

    Uses the normal approximation with the tie-corrected variance and no
    continuity correction. With binary outcomes the ranks collapse to two
    tie blocks so U has a closed form. Callers must ensure every subject
    was followed up to ``t_star``.
    """
    y_a = event_by(time_a, event_a, t_star)
    y_b = event_by(time_b, event_b, t_star)
    n_a, n_b = y_a.size, y_b.size
    if n_a == 0 or n_b == 0:
        raise ValueError("empty group")
    method = TestMethod.utest(t_star)

    k_a, k_b = int(y_a.sum()), int(y_b.sum())
    n = n_a + n_b
    ones = k_a + k_b
    zeros = n - ones
    if ones == 0 or zeros == 0:
        return TestResult(0.0, 1.0, method, n_a, n_b)

    rank_zero = (zeros + 1) / 2.0
    rank_one = zeros + (ones + 1) / 2.0
    rank_sum_a = (n_a - k_a) * rank_zero + k_a * rank_one
    u_a = rank_sum_a - n_a * (n_a + 1) / 2.0
    mean = n_a * n_b / 2.0
    ties = (zeros**3 - zeros) + (ones**3 - ones)
    var = n_a * n_b / 12.0 * ((n + 1) - ties / (n * (n - 1)))
    if var <= 0:
        return TestResult(0.0, 1.0, method, n_a, n_b)
    z = (u_a - mean) / math.sqrt(var)
    p = min(1.0, 2.0 * normal_sf(abs(z)))
    return TestResult(z, p, method, n_a, n_b)


def run_test(method: TestMethod, a: Dataset, b: Dataset) -> TestResult:
    if method.kind is TestKind.UTEST:
        return u_test(a.time, b.time, method.t_star, a.event, b.event)
    return logrank_test(a.time, b.time, a.event, b.event)


def p_value(method: TestMethod, a: Dataset, b: Dataset) -> float:
    """p-value of ``method`` on two groups; degenerate comparisons give 1."""
    try:
        return run_test(method, a, b).p_value
    except DegenerateTestError:
        return 1.0


def pairwise_pvalues(groups: Sequence[Dataset], method: TestMethod) -> np.ndarray:
    if len(groups) < 2:
        raise ValueError("need at least two groups")
    for g in groups:
        if len(g) == 0:
            raise ValueError("empty group")
    k = len(groups)
    out = np.ones((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            out[i, j] = out[j, i] = p_value(method, groups[i], groups[j])
    return out
