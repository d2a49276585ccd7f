"""Mergeable Monte Carlo accumulators and two-sample comparisons."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class MCEstimate:
    """Running mean with the sum of squared deviations (``m2``) and count."""

    mean: float = 0.0
    m2: float = 0.0
    n: int = 0

    @classmethod
    def from_samples(cls, x) -> "MCEstimate":
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size == 0:
            return cls()
        if np.all(x == x[0]):
            # np.mean of a constant array can be off in the last bit
            return cls(float(x[0]), 0.0, int(x.size))
        mu = float(np.mean(x))
        return cls(mu, float(np.sum((x - mu) ** 2)), int(x.size))

    @property
    def variance(self) -> float:
        return self.m2 / (self.n - 1) if self.n >= 2 else math.nan

    @property
    def se(self) -> float:
        if self.n < 2:
            return math.nan
        return math.sqrt(self.m2 / (self.n * (self.n - 1)))

    def merge(self, other: "MCEstimate") -> "MCEstimate":
        """Chan et al. pairwise update; the result depends on argument order
        only through floating point rounding, so callers merge in a fixed order."""
        if other.n == 0:
            return self
        if self.n == 0:
            return other
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * other.n / n
        m2 = self.m2 + other.m2 + delta * delta * self.n * other.n / n
        return MCEstimate(mean, m2, n)

    @staticmethod
    def merge_all(parts: Iterable["MCEstimate"]) -> "MCEstimate":
        acc = MCEstimate()
        for p in parts:
            acc = acc.merge(p)
        return acc

    def ci(self, confidence: float = 0.99) -> tuple[float, float]:
        z = stats.norm.ppf(0.5 + confidence / 2)
        return self.mean - z * self.se, self.mean + z * self.se

    def to_dict(self) -> dict:
        return {"mean": self.mean, "se": self.se, "n": self.n}


@dataclass(frozen=True)
class WelchResult:
    z: float
    p_value: float
    critical: float

    @property
    def reject(self) -> bool:
        return not abs(self.z) < self.critical


def welch(left: MCEstimate, right: MCEstimate, confidence: float = 0.99) -> WelchResult:
    """Large-sample Welch z-statistic for equality of two means.

    Zero standard error on both sides gives ``z = 0`` when the means agree
    exactly and ``z = inf`` otherwise.
    """
    crit = float(stats.norm.ppf(0.5 + confidence / 2))
    se_l = left.se if left.n >= 2 else 0.0
    se_r = right.se if right.n >= 2 else 0.0
    diff = left.mean - right.mean
    s = math.sqrt(se_l * se_l + se_r * se_r)
    if s == 0.0:
        z = 0.0 if diff == 0.0 else math.copysign(math.inf, diff)
    else:
        z = diff / s
    p = float(2.0 * stats.norm.sf(abs(z)))
    return WelchResult(z, p, crit)
