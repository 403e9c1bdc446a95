"""Both phases end to end: grow the tree, then merge its leaves."""

from __future__ import annotations

from dataclasses import dataclass

from .merge import MergeConfig, merge_leaves
from .partition import Partition
from .stats import TestMethod
from .survival import Dataset
from .tree import GrowConfig, Tree, grow_tree


@dataclass(frozen=True)
class RiskStratifyConfig:
    alpha: float = 0.05
    alpha_prime: float | None = None
    method: TestMethod = TestMethod.utest(5.0)
    n_leaf: int = 2
    min_node: int | None = None
    delta: float | None = None
    max_depth: int | None = None
    horizon: float | None = None
    t_star: float | None = None
    threads: int = 1

    def grow_config(self) -> GrowConfig:
        return GrowConfig(
            alpha=self.alpha,
            alpha_prime=self.alpha_prime,
            method=self.method,
            min_node=self.min_node,
            delta=self.delta,
            max_depth=self.max_depth,
            horizon=self.horizon,
            threads=self.threads,
        )

    @property
    def report_time(self) -> float | None:
        return self.t_star if self.t_star is not None else self.method.t_star


@dataclass
class RiskStratifyModel:
    tree: Tree
    partition: Partition
    config: RiskStratifyConfig

    def leaf_to_region(self) -> dict[int, int]:
        return {leaf: region.id for region in self.partition.regions for leaf in region.provenance}


def fit(data: Dataset, config: RiskStratifyConfig | None = None) -> RiskStratifyModel:
    config = config or RiskStratifyConfig()
    tree = grow_tree(data, config.grow_config())
    merge_config = MergeConfig(tree.config.alpha_prime, config.method, config.n_leaf)
    partition = merge_leaves(tree.leaf_groups(data), merge_config, t_star=config.report_time)
    return RiskStratifyModel(tree, partition, config)


def fit_partition_only(config: RiskStratifyConfig):
    """A ``Dataset -> Partition`` procedure for cross-validation."""
    return lambda data: fit(data, config).partition
