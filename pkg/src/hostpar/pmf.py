"""Truncated probability mass functions with an explicit overflow bucket.

All exact oracles compute on pmfs over {0, ..., k_max} plus a lumped
`overflow` mass for values > k_max.  Because offspring counts are nonnegative,
a truncated convolution keeps every bucket <= k_max exact: any contribution
involving an overflowed operand lands beyond k_max.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MASS_TOL = 1e-10


@dataclass
class PmfVector:
    """Pmf on {0..k_max} with the mass of values > k_max in `overflow`."""

    probs: np.ndarray
    overflow: float = 0.0

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        if self.probs.ndim != 1 or len(self.probs) == 0:
            raise ValueError("probs must be a nonempty 1-D array")
        if np.any(self.probs < -MASS_TOL) or self.overflow < -MASS_TOL:
            raise ValueError("negative probability mass")
        total = float(self.probs.sum()) + self.overflow
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"total mass {total!r} != 1")

    @property
    def k_max(self) -> int:
        return len(self.probs) - 1

    def mean_bounds(self) -> tuple[float, float]:
        """(lower bound on the mean, overflow mass).  The true mean is at
        least the lower bound; overflow values are unbounded above."""
        lower = float(np.dot(np.arange(len(self.probs)), self.probs))
        return lower + (self.k_max + 1) * self.overflow, self.overflow

    def mean_lower(self) -> float:
        return float(np.dot(np.arange(len(self.probs)), self.probs))

    def conditional_positive(self) -> "PmfVector":
        """Conditional pmf given the value is > 0 (overflow counts as > 0)."""
        surv = float(self.probs[1:].sum()) + self.overflow
        if surv <= 0.0:
            raise ValueError("no positive mass to condition on")
        probs = self.probs.copy()
        probs[0] = 0.0
        return PmfVector(probs / surv, self.overflow / surv)

    def tv_distance(self, other: "PmfVector") -> float:
        n = max(len(self.probs), len(other.probs))
        a = np.zeros(n)
        b = np.zeros(n)
        a[: len(self.probs)] = self.probs
        b[: len(other.probs)] = other.probs
        return 0.5 * (float(np.abs(a - b).sum()) + abs(self.overflow - other.overflow))

    @classmethod
    def delta(cls, k: int, k_max: int) -> "PmfVector":
        probs = np.zeros(k_max + 1)
        if k <= k_max:
            probs[k] = 1.0
            return cls(probs)
        return cls(probs, overflow=1.0)

    @classmethod
    def from_dense(cls, dense: np.ndarray, k_max: int) -> "PmfVector":
        probs = np.zeros(k_max + 1)
        upto = min(len(dense), k_max + 1)
        probs[:upto] = dense[:upto]
        return cls(probs, overflow=max(0.0, float(dense[upto:].sum())))


def convolve_trunc(a: np.ndarray, b: np.ndarray, k_max: int) -> np.ndarray:
    """Truncated convolution of two bucket arrays; entries <= k_max are exact,
    the lost mass belongs to the overflow bucket."""
    full = np.convolve(a, b)
    return full[: k_max + 1]


class ConvPowerCache:
    """z-fold convolution powers of a base pmf, truncated at k_max.

    Powers are built by binary exponentiation; every intermediate power is
    cached, so a sweep over z = 1..Z costs O(Z) convolutions overall.
    """

    def __init__(self, base: np.ndarray, k_max: int):
        base = np.asarray(base, dtype=float)
        self.k_max = k_max
        upto = min(len(base), k_max + 1)
        self._base_short = base[:upto].copy()  # short operand keeps convs cheap
        self._cache: dict[int, np.ndarray] = {
            0: np.eye(1, k_max + 1, 0).ravel(),
            1: np.zeros(k_max + 1),
        }
        self._cache[1][:upto] = base[:upto]

    def power(self, z: int) -> np.ndarray:
        if z < 0:
            raise ValueError("z must be >= 0")
        if z in self._cache:
            return self._cache[z]
        half = self.power(z // 2)
        result = convolve_trunc(half, half, self.k_max)
        if z % 2:
            result = convolve_trunc(result, self._base_short, self.k_max)
        self._cache[z] = result
        return result

    def powers_upto(self, z_max: int) -> np.ndarray:
        """Matrix P with P[z] = base^{*z} truncated, z = 0..z_max."""
        out = np.empty((z_max + 1, self.k_max + 1))
        out[0] = self._cache[0]
        for z in range(1, z_max + 1):
            if z in self._cache:
                out[z] = self._cache[z]
            else:
                out[z] = convolve_trunc(out[z - 1], self._base_short, self.k_max)
                self._cache[z] = out[z]
        return out
