"""Deterministic pseudo-randomness built on splitmix64.

Every random draw in the package flows through :class:`Rng`, so a single
64-bit seed fully determines training runs, dataset generation and weight
initialization, independent of platform or interpreter version.

An ``Rng`` is single-owner: code that needs independent streams must create
them explicitly via :meth:`Rng.split` or :func:`derive_seed` instead of
sharing one generator.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
# 2^-53: top 53 bits of a u64 mapped onto [0, 1)
_U53 = 2.0 ** -53


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, stream: int) -> int:
    """Derive an independent child seed for a named stream index.

    Used to give distinct purposes (data split, weight init, training loop)
    their own generators from one user-facing seed.
    """
    return _mix((seed + stream * _GAMMA) & _MASK64)


class Rng:
    """splitmix64 generator; the same seed yields the same draw sequence."""

    __slots__ = ("_state",)

    def __init__(self, seed: int) -> None:
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        return _mix(self._state)

    def split(self) -> "Rng":
        """Create an independent child generator, advancing this one."""
        return Rng(self.next_u64())

    def uniform(self, lo: float, hi: float) -> float:
        """Draw one value from [lo, hi)."""
        if not lo < hi:
            raise ValueError(f"uniform() needs lo < hi, got [{lo}, {hi})")
        u = (self.next_u64() >> 11) * _U53
        return lo + u * (hi - lo)

    def uniform_array(self, n: int, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
        """Vectorized uniform draws; bit-identical to n calls of uniform()."""
        if not lo < hi:
            raise ValueError(f"uniform_array() needs lo < hi, got [{lo}, {hi})")
        if n == 0:
            return np.empty(0, dtype=np.float64)
        states = np.uint64(self._state) + np.uint64(_GAMMA) * np.arange(
            1, n + 1, dtype=np.uint64
        )
        with np.errstate(over="ignore"):
            z = (states ^ (states >> np.uint64(30))) * np.uint64(_MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
            z = z ^ (z >> np.uint64(31))
        self._state = int(states[-1])
        u = (z >> np.uint64(11)).astype(np.float64) * _U53
        return lo + u * (hi - lo)

    def normal(self, mean: float = 0.0, stddev: float = 1.0) -> float:
        """One Gaussian draw via Box-Muller; consumes exactly two uniforms."""
        if stddev <= 0:
            raise ValueError(f"normal() needs stddev > 0, got {stddev}")
        u1 = self.uniform(0.0, 1.0)
        u2 = self.uniform(0.0, 1.0)
        # 1-u1 lies in (0, 1], keeping the log argument positive
        z = math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)
        return mean + stddev * z

    def normal_array(
        self, n: int, mean: float = 0.0, stddev: float = 1.0
    ) -> np.ndarray:
        """Vectorized Gaussian draws; bit-identical to n calls of normal()."""
        if stddev <= 0:
            raise ValueError(f"normal_array() needs stddev > 0, got {stddev}")
        if n == 0:
            return np.empty(0, dtype=np.float64)
        u = self.uniform_array(2 * n)
        z = np.sqrt(-2.0 * np.log(1.0 - u[0::2])) * np.cos(2.0 * np.pi * u[1::2])
        return mean + stddev * z

    def shuffle_indices(self, n: int) -> list[int]:
        """Fisher-Yates permutation of 0..n-1."""
        if n < 0:
            raise ValueError(f"shuffle_indices() needs n >= 0, got {n}")
        perm = list(range(n))
        for i in range(n - 1, 0, -1):
            # rejection-free bounded draw: scale a uniform into 0..i
            j = int(self.uniform(0.0, float(i + 1)))
            perm[i], perm[j] = perm[j], perm[i]
        return perm
