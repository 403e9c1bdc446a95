"""Risk stratification of survival data.

Phase one grows a tree whose every split separates the children's risk at
a stated significance level; phase two merges leaves whose risks cannot be
told apart, so the final groups are ordered by risk with high confidence.
"""

__version__ = "0.1.0"

from .evaluation import CvSummary, FdrReport, cross_validate, estimate_fdr, quantile_partition
from .merge import MergeConfig, merge_leaves
from .partition import Hypercube, Partition, Region, validate_partition
from .pipeline import RiskStratifyConfig, RiskStratifyModel, fit
from .stats import TestMethod, logrank_test, u_test
from .survival import CovariateSchema, Dataset, SurvivalCurve, SurvivalRecord, km_estimate
from .synthetic import XorConfig, generate_null, generate_xor
from .tree import GrowConfig, grow_tree

__all__ = [
    "CovariateSchema", "CvSummary", "Dataset", "FdrReport", "GrowConfig", "Hypercube",
    "MergeConfig", "Partition", "Region", "RiskStratifyConfig", "RiskStratifyModel",
    "SurvivalCurve", "SurvivalRecord", "TestMethod", "XorConfig", "cross_validate",
    "estimate_fdr", "fit", "generate_null", "generate_xor", "grow_tree", "km_estimate",
    "logrank_test", "merge_leaves", "quantile_partition", "u_test", "validate_partition",
]
