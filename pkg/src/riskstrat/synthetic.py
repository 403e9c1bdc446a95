"""Seeded synthetic cohorts.

``generate_xor`` draws from the two-covariate XOR model whose survival is
``min(1, 5/(1+t))`` when ``x1 == x2`` and ``min(1, 10/(1+2t))`` otherwise,
so the 5-year risks are 1/6 and 1/11. ``generate_null`` draws covariates
that carry no information about survival.

Draw order is part of the determinism contract and must not change:
xor uses blocks x1, agreement flips, failure uniforms, then censoring;
null uses one block per covariate, then failure times.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import SplitMix64
from .survival import CovariateSchema, Dataset

XOR_SCHEMA = CovariateSchema.binary(["x1", "x2"])


@dataclass(frozen=True)
class XorConfig:
    """
    Parameters
    ----------
    n : number of subjects
    rho : correlation between x1 and x2; x2 equals x1 with probability (1+rho)/2
    censor_rate : rate of independent exponential censoring, 0 for none
    seed : PRNG seed
    p_x1 : P(x1 = 1). With a fair x1 the XOR class is independent of each
        covariate on its own, so no single-covariate split separates risk;
        an unbalanced x1 makes the x2 split informative. ``p_x1=0.5`` with
        ``rho=0`` is the plain XOR model.
    """

    n: int
    rho: float = 0.3
    censor_rate: float = 0.0
    seed: int = 0
    p_x1: float = 0.2

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [-1, 1]")
        if self.censor_rate < 0:
            raise ValueError("censor_rate must be non-negative")
        if not 0.0 < self.p_x1 < 1.0:
            raise ValueError("p_x1 must lie in (0, 1)")


def xor_survival(t, xor_class):
    t = np.asarray(t, dtype=float)
    return np.where(np.asarray(xor_class) == 0, np.minimum(1.0, 5.0 / (1.0 + t)), np.minimum(1.0, 10.0 / (1.0 + 2.0 * t)))


def xor_risk(t_star: float, xor_class: int) -> float:
    return float(1.0 - xor_survival(t_star, xor_class))


def generate_xor(config: XorConfig) -> Dataset:
    rng = SplitMix64(config.seed)
    n = config.n
    x1 = (rng.random(n) < config.p_x1).astype(np.int64)
    agree = rng.random(n) < (1.0 + config.rho) / 2.0
    x2 = np.where(agree, x1, 1 - x1)
    xor_class = x1 ^ x2

    # inverse transform of the clamped curves; U in (0, 1]
    u = rng.random_open_closed(n)
    failure = np.where(xor_class == 0, 5.0 / u - 1.0, (10.0 / u - 1.0) / 2.0)

    if config.censor_rate > 0:
        censor = rng.exponential(config.censor_rate, n)
        time = np.minimum(failure, censor)
        event = failure <= censor
    else:
        time, event = failure, np.ones(n, bool)
    return Dataset(XOR_SCHEMA, np.column_stack([x1, x2]), time, event)


def generate_null(n: int, d: int, seed: int) -> Dataset:
    """Fair-coin covariates and unit-rate exponential failure times, no censoring."""
    if n < 1 or d < 1:
        raise ValueError("n and d must be at least 1")
    rng = SplitMix64(seed)
    X = np.column_stack([(rng.random(n) < 0.5).astype(np.int64) for _ in range(d)])
    time = rng.exponential(1.0, n)
    return Dataset(CovariateSchema.binary([f"x{i + 1}" for i in range(d)]), X, time, np.ones(n, bool))
