"""Out-of-sample false discovery rate of a partition.

Every pair of regions claimed to differ is re-tested on held-out data at a
Bonferroni-adjusted level; a pair that fails to reject counts as a false
positive. Repeated random half splits give a mean FDR with a t-based 95%
confidence interval.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats as sps

from .partition import Partition
from .rng import SplitMix64
from .stats import TestMethod, p_value
from .survival import Dataset


@dataclass(frozen=True)
class PairVerdict:
    a: int
    b: int
    p_value: float | None  # None when a region is empty in the holdout
    true_positive: bool


@dataclass(frozen=True)
class FdrReport:
    comparisons: int
    declared_false: int
    level: float
    per_pair: tuple[PairVerdict, ...] = ()

    @property
    def fdr(self) -> float:
        return self.declared_false / self.comparisons if self.comparisons else 0.0


@dataclass(frozen=True)
class CvSummary:
    runs: int
    mean_fdr: float
    ci95_halfwidth: float
    ci_defined: bool
    mean_region_count: float
    failures: int = 0
    run_fdrs: tuple[float, ...] = ()
    run_region_counts: tuple[int, ...] = ()
    errors: tuple[str, ...] = field(default=(), repr=False)

    def as_row(self) -> dict:
        return {
            "runs": self.runs,
            "failures": self.failures,
            "mean_fdr": self.mean_fdr,
            "ci95_halfwidth": self.ci95_halfwidth if self.ci_defined else None,
            "mean_region_count": self.mean_region_count,
            "run_fdrs": list(self.run_fdrs),
            "run_region_counts": list(self.run_region_counts),
        }


def fdr_of_groups(groups: Sequence[Dataset], alpha: float, method: TestMethod, labels: Sequence[int] | None = None) -> FdrReport:
    """FDR estimate for held-out records already split into claimed-distinct groups."""
    k = len(groups)
    labels = list(range(k)) if labels is None else list(labels)
    comparisons = k * (k - 1) // 2
    if comparisons == 0:
        return FdrReport(0, 0, alpha)
    level = alpha / comparisons
    verdicts = []
    for i in range(k):
        for j in range(i + 1, k):
            if len(groups[i]) == 0 or len(groups[j]) == 0:
                verdicts.append(PairVerdict(labels[i], labels[j], None, False))
                continue
            p = p_value(method, groups[i], groups[j])
            verdicts.append(PairVerdict(labels[i], labels[j], p, p < level))
    false = sum(not v.true_positive for v in verdicts)
    return FdrReport(comparisons, false, level, tuple(verdicts))


def estimate_fdr(partition: Partition, holdout: Dataset, alpha: float = 0.05, method: TestMethod | None = None) -> FdrReport:
    method = method or TestMethod.logrank()
    groups = partition.split_data(holdout)
    return fdr_of_groups(groups, alpha, method, partition.ids)


def _ci95(values: Sequence[float]) -> tuple[float, bool]:
    n = len(values)
    if n < 2:
        return 0.0, False
    sd = float(np.std(values, ddof=1))
    return float(sps.t.ppf(0.975, n - 1)) * sd / math.sqrt(n), True


def half_split(n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Random 50/50 split of ``range(n)``; the first half gets the odd record."""
    perm = SplitMix64(seed).permutation(n)
    cut = (n + 1) // 2
    return np.sort(perm[:cut]), np.sort(perm[cut:])


def _summarise(results: list, runs: int) -> CvSummary:
    good = [r for r in results if not isinstance(r, str)]
    errors = tuple(r for r in results if isinstance(r, str))
    fdrs = [f for f, _ in good]
    counts = [c for _, c in good]
    half, defined = _ci95(fdrs)
    return CvSummary(
        runs=len(good),
        mean_fdr=float(np.mean(fdrs)) if fdrs else float("nan"),
        ci95_halfwidth=half,
        ci_defined=defined,
        mean_region_count=float(np.mean(counts)) if counts else float("nan"),
        failures=runs - len(good),
        run_fdrs=tuple(fdrs),
        run_region_counts=tuple(counts),
        errors=errors,
    )


def run_seeds(seed: int, runs: int) -> list[int]:
    master = SplitMix64(seed)
    return [master.spawn(k) for k in range(runs)]


def cross_validate(
    data: Dataset,
    fit: Callable[[Dataset], Partition],
    alpha: float = 0.05,
    method: TestMethod | None = None,
    runs: int = 10,
    seed: int = 0,
    threads: int = 1,
) -> CvSummary:
    """Fit on a random half, estimate FDR on the other half, ``runs`` times.

    A run whose fit raises is counted in ``failures`` and left out of the
    averages.
    """
    if len(data) < 2:
        raise ValueError("need at least two records")
    if runs < 1:
        raise ValueError("runs must be at least 1")
    method = method or TestMethod.logrank()

    def one(run_seed):
        train_idx, test_idx = half_split(len(data), run_seed)
        try:
            partition = fit(data.subset(train_idx))
        except Exception as exc:  # a failed run is reported, not fatal
            return f"{type(exc).__name__}: {exc}"
        report = estimate_fdr(partition, data.subset(test_idx), alpha, method)
        return report.fdr, len(partition)

    seeds = run_seeds(seed, runs)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(one, seeds))
    else:
        results = [one(s) for s in seeds]
    return _summarise(results, runs)


def quantile_partition(scores: Sequence[tuple[int, float]], k: int) -> list[list[int]]:
    """Split records into ``k`` equal-count buckets from low to high score.

    Bucket sizes differ by at most one; the lowest-score buckets take the
    extra records. Ties in score are ordered by record index.
    """
    scores = list(scores)
    if not scores:
        raise ValueError("no scores")
    if k < 1 or k > len(scores):
        raise ValueError(f"k must lie in [1, {len(scores)}]")
    ordered = [idx for idx, _ in sorted(scores, key=lambda s: (s[1], s[0]))]
    base, extra = divmod(len(ordered), k)
    buckets, start = [], 0
    for b in range(k):
        size = base + (1 if b < extra else 0)
        buckets.append(ordered[start:start + size])
        start += size
    return buckets


def cross_validate_scores(
    data: Dataset,
    scores: Sequence[float],
    k: int,
    alpha: float = 0.05,
    method: TestMethod | None = None,
    runs: int = 10,
    seed: int = 0,
) -> CvSummary:
    """FDR of equal-count risk-score buckets for an external model.

    Bucket boundaries come from the training half's scores; held-out
    records are placed in buckets by score.
    """
    scores = np.asarray(scores, dtype=float)
    if len(scores) != len(data):
        raise ValueError("one score per record required")
    method = method or TestMethod.logrank()
    results = []
    for run_seed in run_seeds(seed, runs):
        train_idx, test_idx = half_split(len(data), run_seed)
        try:
            buckets = quantile_partition([(int(i), scores[i]) for i in train_idx], k)
        except ValueError as exc:
            results.append(str(exc))
            continue
        upper = np.array([max(scores[b]) for b in buckets[:-1]])
        test_bucket = np.searchsorted(upper, scores[test_idx], side="left")
        groups = [data.subset(test_idx[test_bucket == b]) for b in range(k)]
        results.append((fdr_of_groups(groups, alpha, method).fdr, k))
    return _summarise(results, runs)
