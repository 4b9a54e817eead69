"""Deterministic random generator for optional noise injection.

All randomness in experiment runs flows from a single integer seed through
this generator, so identical configurations produce byte-identical outputs
on any platform. The algorithm is xorshift64*, defined by the update

    x <- x XOR (x >> 12)
    x <- x XOR ((x << 25) mod 2^64)
    x <- x XOR (x >> 27)
    output <- (x * 2685821657736338717) mod 2^64

with uniform doubles taken from the top 53 output bits and normal deviates
by the Box-Muller transform on uniform pairs.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["Xorshift64Star"]

_MASK = (1 << 64) - 1
_MULT = 2685821657736338717


class Xorshift64Star:
    """xorshift64* stream; seed must be a nonzero 64-bit integer."""

    def __init__(self, seed: int):
        seed = int(seed) & _MASK
        if seed == 0:
            seed = 0x9E3779B97F4A7C15  # golden-ratio fallback, nonzero
        self._state = seed
        self._spare: float | None = None

    def next_u64(self) -> int:
        x = self._state
        x ^= x >> 12
        x ^= (x << 25) & _MASK
        x ^= x >> 27
        self._state = x
        return (x * _MULT) & _MASK

    def uniform(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def normal(self) -> float:
        """Standard normal deviate via Box-Muller; caches the spare."""
        if self._spare is not None:
            z = self._spare
            self._spare = None
            return z
        while True:
            u1 = self.uniform()
            if u1 > 0.0:
                break
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        self._spare = r * math.sin(2.0 * math.pi * u2)
        return r * math.cos(2.0 * math.pi * u2)

    def normal_array(self, n: int) -> np.ndarray:
        return np.array([self.normal() for _ in range(n)])
