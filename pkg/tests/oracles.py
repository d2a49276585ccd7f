"""Closed-form reference values computed without the package."""

import math


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def gaussian_mass(a: float, b: float, sigma: float = 1.0) -> float:
    """P(a < X < b) for X ~ N(0, sigma^2)."""
    return 0.5 * (math.erf(b / (sigma * math.sqrt(2))) - math.erf(a / (sigma * math.sqrt(2))))


def br_pair_exponent(nu: float) -> float:
    """E max(1, exp(G - nu/2)) with G ~ N(0, nu): equals 2 Phi(sqrt(nu)/2)."""
    return 2.0 * normal_cdf(math.sqrt(nu) / 2.0)


def br_pair_exponent_quadrature(nu: float, n: int = 200_001) -> float:
    """Same quantity by brute-force midpoint integration over the Gaussian density."""
    s = math.sqrt(nu)
    lo, hi = -12.0, 12.0
    h = (hi - lo) / n
    total = 0.0
    for i in range(n):
        g = lo + (i + 0.5) * h
        total += max(1.0, math.exp(s * g - nu / 2)) * math.exp(-g * g / 2)
    return total * h / math.sqrt(2 * math.pi)


def lognormal_moment(k: float, nu: float) -> float:
    """E exp(k (W - nu/2)) for W ~ N(0, nu)."""
    return math.exp(0.5 * k * k * nu - 0.5 * k * nu)


def pareto_survival(s: float, alpha: float) -> float:
    return s ** -alpha if s >= 1 else 1.0
