"""Portable seeded random numbers.

SplitMix64 (Steele, Lea & Flood 2014; reference code by S. Vigna): the
state advances by the golden-ratio increment and each output is the
finalising mix of the new state. Because the k-th output depends only on
``seed + k * GAMMA`` a block of draws is computed in one vectorised step,
and the sequence is identical on every platform and numpy version.

Uniform doubles take the top 53 bits: ``(x >> 11) * 2**-53`` in [0, 1).
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)


class SplitMix64:
    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next_uint64(self, n: int) -> np.ndarray:
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.state) + steps * np.uint64(GAMMA)
            z = (z ^ (z >> np.uint64(30))) * _MUL1
            z = (z ^ (z >> np.uint64(27))) * _MUL2
            z = z ^ (z >> np.uint64(31))
        self.state = (self.state + n * GAMMA) & MASK64
        return z

    def random(self, n: int) -> np.ndarray:
        """``n`` uniforms on [0, 1)."""
        return (self.next_uint64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def random_open_closed(self, n: int) -> np.ndarray:
        """``n`` uniforms on (0, 1]."""
        return 1.0 - self.random(n)

    def integers(self, high: int, n: int) -> np.ndarray:
        """``n`` integers uniform on [0, high)."""
        return np.minimum((self.random(n) * high).astype(np.int64), high - 1)

    def exponential(self, rate: float, n: int) -> np.ndarray:
        return -np.log(self.random_open_closed(n)) / rate

    def permutation(self, n: int) -> np.ndarray:
        # argsort of fresh 64-bit keys; ties are astronomically unlikely and
        # broken by position since the sort is stable
        return np.argsort(self.next_uint64(n), kind="stable")

    def spawn(self, k: int) -> int:
        """Derive the seed of the ``k``-th independent child stream."""
        child = SplitMix64((self.state + (k + 1) * 0xD1B54A32D192ED03) & MASK64)
        return int(child.next_uint64(1)[0])
