"""Centered Gaussian fields with stationary increments, pinned at the origin.

The covariance is built from a variogram ``nu`` as

    Cov(W(s), W(t)) = (nu(s) + nu(t) - nu(s - t)) / 2,

so ``W(0) = 0`` and ``Var(W(t) - W(s)) = nu(t - s)``. Draws use a Cholesky
factor of the covariance on the requested sites.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cholesky, solve_triangular

from .core import PathSample, PointSet
from .errors import ConfigurationError, NumericalError

_JITTER_RETRIES = 3


@dataclass(frozen=True)
class VariogramModel:
    """Fractional variogram ``nu(h) = theta * |h|_2^(2 H)``."""

    theta: float = 1.0
    hurst: float = 0.5
    kind: str = "fractional"

    def __post_init__(self):
        if self.kind != "fractional":
            raise ConfigurationError(f"unknown variogram kind {self.kind!r}")
        if not self.theta > 0:
            raise ConfigurationError(f"variogram scale must be positive, got {self.theta}")
        if not 0 < self.hurst <= 1:
            raise ConfigurationError(f"Hurst exponent must lie in (0, 1], got {self.hurst}")

    def __call__(self, h) -> np.ndarray:
        h = np.asarray(h, dtype=float)
        if h.ndim == 0:
            r2 = h * h
        else:
            r2 = np.sum(h * h, axis=-1)
        # |h|^(2H) written via r^2 to avoid a sqrt
        return self.theta * np.power(r2, self.hurst)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "theta": self.theta, "hurst": self.hurst}


def cov_from_variogram(s, t, model: VariogramModel) -> float:
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    return float(0.5 * (model(s) + model(t) - model(s - t)))


def covariance_matrix(a: np.ndarray, b: np.ndarray, model: VariogramModel) -> np.ndarray:
    """Cross-covariance between site arrays ``a`` (p, l) and ``b`` (q, l)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    va = model(a)[:, None]
    vb = model(b)[None, :]
    vab = model(a[:, None, :] - b[None, :, :])
    return 0.5 * (va + vb - vab)


def _chol_with_jitter(c: np.ndarray, jitter: float) -> np.ndarray:
    k = c.shape[0]
    if k == 0:
        return np.zeros((0, 0))
    eye = np.eye(k)
    j = jitter
    for _ in range(_JITTER_RETRIES + 1):
        try:
            return cholesky(c + j * eye, lower=True, check_finite=False)
        except LinAlgError:
            j = 10.0 * j if j > 0 else 1e-12
    lam = float(np.linalg.eigvalsh(0.5 * (c + c.T))[0])
    raise NumericalError(
        f"Cholesky failed on a {k}x{k} covariance after jitter escalation to {j / 10:.1e}; "
        f"minimum eigenvalue estimate {lam:.3e}"
    )


@functools.lru_cache(maxsize=32)
def _cached_factor(model: VariogramModel, jitter: float, key: bytes, k: int, l: int) -> np.ndarray:
    pts = np.frombuffer(key, dtype=float).reshape(k, l)
    L = _chol_with_jitter(covariance_matrix(pts, pts, model), jitter)
    L.setflags(write=False)
    return L


def _extend_factor(L11: np.ndarray, p1: np.ndarray, p2: np.ndarray,
                   model: VariogramModel, jitter: float) -> np.ndarray:
    """Cholesky factor of the joint covariance of ``p1 + p2`` given that of ``p1``."""
    k1, k2 = len(p1), len(p2)
    if k2 == 0:
        return np.array(L11)
    if k1 == 0:
        return _chol_with_jitter(covariance_matrix(p2, p2, model), jitter)
    c12 = covariance_matrix(p1, p2, model)
    c22 = covariance_matrix(p2, p2, model)
    L21 = solve_triangular(L11, c12, lower=True, check_finite=False).T
    L22 = _chol_with_jitter(c22 - L21 @ L21.T, jitter)
    L = np.zeros((k1 + k2, k1 + k2))
    L[:k1, :k1] = L11
    L[k1:, :k1] = L21
    L[k1:, k1:] = L22
    return L


@dataclass(frozen=True)
class GaussianSampler:
    """Sampler for the pinned Gaussian field driving Brown-Resnick representors.

    Vector-valued fields (``dim_d > 1``) are drawn as independent copies
    sharing one variogram.
    """

    variogram: VariogramModel = VariogramModel()
    jitter: float = 1e-10
    independent_components: bool = True

    def __post_init__(self):
        if self.jitter < 0:
            raise ConfigurationError("jitter must be nonnegative")
        if not self.independent_components:
            raise ConfigurationError("cross-correlated components are not supported")

    def factor(self, points: np.ndarray, prefix: int = 0) -> np.ndarray:
        """Lower Cholesky factor for distinct, non-origin ``points``.

        The factor of the first ``prefix`` rows is cached and reused, so a
        fixed block (e.g. quadrature nodes) shared by many calls is
        factored once.
        """
        points = np.ascontiguousarray(points, dtype=float)
        k, l = points.shape
        if prefix >= k:
            return _cached_factor(self.variogram, self.jitter, points.tobytes(), k, l)
        if prefix <= 0:
            return _chol_with_jitter(covariance_matrix(points, points, self.variogram), self.jitter)
        head = np.ascontiguousarray(points[:prefix])
        L11 = _cached_factor(self.variogram, self.jitter, head.tobytes(), prefix, l)
        return _extend_factor(L11, head, points[prefix:], self.variogram, self.jitter)

    def sample(self, sites: PointSet, n: int, rng: np.random.Generator,
               dim_d: int = 1, prefix: int | None = None) -> np.ndarray:
        """``n`` joint draws at ``sites``; returns an array of shape (n, m, dim_d).

        Sites exactly at the origin get the value 0. Repeated sites get
        identical values. ``prefix`` marks a leading block of sites whose
        factor should be cached; by default the whole set is cached.
        """
        m = len(sites)
        out = np.zeros((n, m, dim_d))
        if m == 0 or n == 0:
            return out
        uniq, inverse = sites.dedup()
        pts = uniq.points
        free = ~np.all(pts == 0.0, axis=1)
        free_idx = np.flatnonzero(free)
        if free_idx.size == 0:
            return out
        if prefix is None:
            pref = free_idx.size
        else:
            # count distinct non-origin sites first seen inside the prefix
            first_seen = np.full(len(uniq), m)
            for i in range(m - 1, -1, -1):
                first_seen[inverse[i]] = i
            pref = int(np.sum(first_seen[free_idx] < prefix))
        L = self.factor(pts[free_idx], prefix=pref)
        k = free_idx.size
        xi = rng.standard_normal((n * dim_d, k))
        w = (xi @ L.T).reshape(n, dim_d, k).transpose(0, 2, 1)
        full = np.zeros((n, len(uniq), dim_d))
        full[:, free_idx, :] = w
        out[:] = full[:, inverse, :]
        return out


def sample_gaussian(sites: PointSet, sampler: GaussianSampler, rng: np.random.Generator,
                    dim_d: int = 1) -> PathSample:
    """One joint draw of the pinned Gaussian field at ``sites``."""
    return PathSample(sites, sampler.sample(sites, 1, rng, dim_d=dim_d)[0])
