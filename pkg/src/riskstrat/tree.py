"""Greedy hypothesis-test-driven tree growth.

Each node is split in two along one ordered-categorical threshold when the
children's outcomes differ at level ``alpha_prime``; among qualifying
splits the most significant one wins. A node with no qualifying split is a
leaf. Unlike CART there is no pruning: redundant leaves are merged later.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .partition import Hypercube, Partition, Region, fit_partition
from .stats import DegenerateTestError, TestKind, TestMethod, run_test
from .survival import CovariateSchema, Dataset, distance_at_time, distance_integrated, km_estimate


def default_min_node(n: int) -> int:
    return max(25, math.ceil(0.005 * n))


@dataclass(frozen=True)
class GrowConfig:
    """Tree growth settings.

    ``alpha_prime`` defaults to ``alpha / d`` and ``min_node`` to
    ``max(25, ceil(0.005 N))``; both are resolved against the data by
    :meth:`resolve`. ``delta`` optionally also requires the empirical
    distance between children (risk gap at t* for the U-test, area between
    curves for log-rank) to reach that value.
    """

    alpha: float = 0.05
    alpha_prime: float | None = None
    method: TestMethod = field(default_factory=TestMethod.logrank)
    min_node: int | None = None
    delta: float | None = None
    max_depth: int | None = None
    horizon: float | None = None
    threads: int = 1

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.alpha_prime is not None and not 0 < self.alpha_prime <= self.alpha:
            raise ValueError("alpha_prime must lie in (0, alpha]")
        if self.min_node is not None and self.min_node < 1:
            raise ValueError("min_node must be at least 1")
        if self.delta is not None and self.delta < 0:
            raise ValueError("delta must be non-negative")

    def resolve(self, data: Dataset) -> "GrowConfig":
        return GrowConfig(
            alpha=self.alpha,
            alpha_prime=self.alpha / data.schema.d if self.alpha_prime is None else self.alpha_prime,
            method=self.method,
            min_node=default_min_node(len(data)) if self.min_node is None else self.min_node,
            delta=self.delta,
            max_depth=self.max_depth,
            horizon=self.horizon,
            threads=self.threads,
        )


@dataclass
class TreeNode:
    node_id: int
    cube: Hypercube
    indices: np.ndarray
    depth: int = 0
    split_dim: int | None = None
    threshold: int | None = None
    p_value: float | None = None
    statistic: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    leaf_id: int | None = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    @property
    def n(self) -> int:
        return len(self.indices)

    def walk(self) -> Iterator["TreeNode"]:
        yield self
        if not self.is_leaf:
            yield from self.left.walk()
            yield from self.right.walk()

    def leaves(self) -> list["TreeNode"]:
        return [node for node in self.walk() if node.is_leaf]


@dataclass(frozen=True)
class Split:
    dim: int
    threshold: int
    p_value: float
    statistic: float
    left: np.ndarray
    right: np.ndarray

    def key(self):
        # smallest p first; the statistic orders p-values that underflow to 0
        return (self.p_value, -abs(self.statistic), self.dim, self.threshold)


@dataclass
class Tree:
    schema: CovariateSchema
    root: TreeNode
    config: GrowConfig

    @property
    def leaves(self) -> list[TreeNode]:
        return self.root.leaves()

    def leaf_regions(self) -> list[Region]:
        return [Region(node.leaf_id, (node.cube,), (node.leaf_id,)) for node in self.leaves]

    def leaf_groups(self, data: Dataset) -> list[tuple[Region, Dataset]]:
        return [(Region(n.leaf_id, (n.cube,), (n.leaf_id,)), data.subset(n.indices)) for n in self.leaves]

    def leaf_partition(self, data: Dataset, t_star: float | None = None) -> Partition:
        """The leaves as a fitted partition, in leaf order (ids = leaf ids)."""
        part = fit_partition(self.schema, self.leaf_groups(data))
        return Partition(self.schema, tuple(self.leaf_regions()), part.curves, part.sizes, t_star)

    def internal_nodes(self) -> list[TreeNode]:
        return [node for node in self.root.walk() if not node.is_leaf]


def enumerate_splits(cube: Hypercube, X: np.ndarray, min_node: int) -> list[tuple[int, int]]:
    """Threshold splits of ``cube`` leaving at least ``min_node`` rows of ``X`` per side.

    ``X`` holds the covariates of the node's records.
    """
    out = []
    n = len(X)
    for dim, (lo, hi) in enumerate(cube.bounds):
        if lo == hi:
            continue
        counts = np.bincount(X[:, dim] - lo, minlength=hi - lo + 1)
        left = np.cumsum(counts)[:-1]
        for offset, n_left in enumerate(left):
            if n_left >= min_node and n - n_left >= min_node:
                out.append((dim, lo + offset))
    return out


def _children_distance(a: Dataset, b: Dataset, config: GrowConfig) -> float:
    ka, kb = km_estimate(a.time, a.event), km_estimate(b.time, b.event)
    if config.method.kind is TestKind.UTEST:
        return distance_at_time(ka, kb, config.method.t_star)
    return distance_integrated(ka, kb, config.horizon)


def _evaluate(node: TreeNode, data: Dataset, config: GrowConfig, dim: int, threshold: int) -> Split | None:
    column = data.X[node.indices, dim]
    left = node.indices[column <= threshold]
    right = node.indices[column > threshold]
    a, b = data.subset(left), data.subset(right)
    try:
        result = run_test(config.method, a, b)
    except DegenerateTestError:
        return None
    if result.p_value > config.alpha_prime:
        return None
    if config.delta is not None and _children_distance(a, b, config) < config.delta:
        return None
    return Split(dim, threshold, result.p_value, result.statistic, left, right)


def theta_split(node: TreeNode, data: Dataset, config: GrowConfig, pool=None) -> Split | None:
    """Best qualifying two-way split of ``node``, or None if it stays whole.

    ``config`` must be resolved (see :meth:`GrowConfig.resolve`).
    """
    if node.n == 0:
        raise ValueError("empty node")
    if config.max_depth is not None and node.depth >= config.max_depth:
        return None
    candidates = enumerate_splits(node.cube, data.X[node.indices], config.min_node)
    if pool is not None:
        found = list(pool.map(lambda c: _evaluate(node, data, config, *c), candidates))
    else:
        found = [_evaluate(node, data, config, *c) for c in candidates]
    found = [s for s in found if s is not None]
    return min(found, key=Split.key) if found else None


def grow_tree(data: Dataset, config: GrowConfig | None = None) -> Tree:
    """Grow the tree depth-first, left child first.

    Leaves are numbered in that order. Candidate evaluation may use a
    thread pool (``config.threads``); the chosen split does not depend on it.
    """
    if len(data) == 0:
        raise ValueError("empty dataset")
    config = (config or GrowConfig()).resolve(data)
    counter = iter(range(1 << 62))
    root = TreeNode(next(counter), Hypercube.full(data.schema), np.arange(len(data)))
    pool = ThreadPoolExecutor(config.threads) if config.threads > 1 else None
    try:
        stack = [root]
        while stack:
            node = stack.pop()
            split = theta_split(node, data, config, pool)
            if split is None:
                continue
            left_cube, right_cube = node.cube.split(split.dim, split.threshold)
            node.split_dim, node.threshold = split.dim, split.threshold
            node.p_value, node.statistic = split.p_value, split.statistic
            node.left = TreeNode(next(counter), left_cube, split.left, node.depth + 1)
            node.right = TreeNode(next(counter), right_cube, split.right, node.depth + 1)
            stack.append(node.right)
            stack.append(node.left)
    finally:
        if pool is not None:
            pool.shutdown()
    for leaf_id, leaf in enumerate(root.leaves()):
        leaf.leaf_id = leaf_id
    return Tree(data.schema, root, config)
