"""Representor samplers: Brown-Resnick, cluster profiles and small adapters.

Every representor exposes ``sample(sites, n, rng) -> Sample`` returning
``n`` joint realizations at an arbitrary finite point set. Samplers hold
no mutable state; all randomness comes from the caller's generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import FieldConfig, PathSample, PointSet, Sample, norm_value
from .errors import ConfigurationError
from .estimate import MCEstimate
from .gaussian import GaussianSampler


def integer_lattice(half_width: float, dim_l: int = 1) -> PointSet:
    """Integer points of ``[-m, m]^l``; the default finite separant."""
    k = int(math.floor(half_width))
    axis = np.arange(-k, k + 1, dtype=float)
    grids = np.meshgrid(*([axis] * dim_l), indexing="ij")
    return PointSet(np.stack([g.reshape(-1) for g in grids], axis=1))


class Representor:
    """Base class. Subclasses implement :meth:`sample` and :meth:`descriptor`.

    ``origin_norm`` is the value of ``||Z(0)||`` when it is deterministic,
    else ``None``. ``separant`` is the finite stand-in for the countable set
    on which ``sup ||Z||`` must be positive.
    """

    kind = "abstract"
    cfg: FieldConfig
    separant: PointSet
    origin_norm: float | None = None

    def sample(self, sites: PointSet, n: int, rng: np.random.Generator,
               prefix: int | None = None) -> Sample:
        raise NotImplementedError

    def descriptor(self) -> dict:
        raise NotImplementedError


def _default_separant(cfg: FieldConfig) -> PointSet:
    return integer_lattice(4.0, cfg.dim_l)


@dataclass(frozen=True, eq=False)
class BrownResnick(Representor):
    """Log-normal field ``Z_j(t) = exp(W_j(t) - nu(t) / 2)`` with ``W`` pinned at 0.

    ``E Z_j(t) = 1`` at every site; the margin condition
    ``E ||Z(0)||^alpha = 1`` therefore holds for ``alpha = 1`` with ``d = 1``
    (or the sup norm).
    """

    cfg: FieldConfig = FieldConfig()
    gaussian: GaussianSampler = GaussianSampler()
    separant: PointSet = None  # type: ignore[assignment]
    kind = "brown_resnick"

    def __post_init__(self):
        if self.separant is None:
            object.__setattr__(self, "separant", _default_separant(self.cfg))

    @property
    def origin_norm(self) -> float:  # type: ignore[override]
        return norm_value(np.ones(self.cfg.dim_d), self.cfg)

    def sample(self, sites, n, rng, prefix=None) -> Sample:
        w = self.gaussian.sample(sites, n, rng, dim_d=self.cfg.dim_d, prefix=prefix)
        nu = self.gaussian.variogram(sites.points)
        return Sample(sites, np.exp(w - 0.5 * nu[None, :, None]))

    def descriptor(self) -> dict:
        return {"kind": self.kind, "variogram": self.gaussian.variogram.to_dict(),
                "jitter": self.gaussian.jitter}


def br_sample(sites: PointSet, g: GaussianSampler, cfg: FieldConfig,
              rng: np.random.Generator) -> PathSample:
    """One Brown-Resnick realization at ``sites``."""
    return BrownResnick(cfg, g).sample(sites, 1, rng).path(0)


# ---------------------------------------------------------------------------
# cluster profiles


_PROFILE_KINDS = ("gaussian_pdf", "triangle", "indicator_box")


@dataclass(frozen=True)
class Profile:
    """Named nonnegative shape, a product over coordinates.

    gaussian_pdf{sigma}: centered normal density; triangle{width}:
    ``max(0, 1 - |t|/width)``; indicator_box{width}: ``1{|t| <= width/2}``.
    """

    kind: str = "gaussian_pdf"
    sigma: float = 1.0
    width: float = 1.0

    def __post_init__(self):
        if self.kind not in _PROFILE_KINDS:
            raise ConfigurationError(f"unknown profile {self.kind!r}; expected one of {_PROFILE_KINDS}")
        if not (self.sigma > 0 and self.width > 0):
            raise ConfigurationError("profile parameters must be positive")

    def shape_1d(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "gaussian_pdf":
            return np.exp(-0.5 * (x / self.sigma) ** 2) / (self.sigma * math.sqrt(2 * math.pi))
        if self.kind == "triangle":
            return np.maximum(0.0, 1.0 - np.abs(x) / self.width)
        return (np.abs(x) <= self.width / 2).astype(float)

    def shape(self, t: np.ndarray) -> np.ndarray:
        return np.prod(self.shape_1d(t), axis=-1)

    def power_integral_1d(self, alpha: float) -> float:
        """Closed form of the integral of ``shape_1d ** alpha`` over R."""
        if self.kind == "gaussian_pdf":
            s = self.sigma
            return (2 * math.pi * s * s) ** ((1 - alpha) / 2) / math.sqrt(alpha)
        if self.kind == "triangle":
            return 2 * self.width / (alpha + 1)
        return self.width

    def quadrature_power_integral_1d(self, alpha: float, cells: int = 200_000) -> float:
        """Midpoint-rule value of the same integral on a window aligned with the kinks."""
        if self.kind == "gaussian_pdf":
            m = self.sigma * math.sqrt(2 * 60 / alpha)
        elif self.kind == "triangle":
            m = self.width
        else:
            m = self.width / 2
        h = 2 * m / cells
        x = -m + (np.arange(cells) + 0.5) * h
        return float(np.sum(self.shape_1d(x) ** alpha) * h)

    def to_dict(self) -> dict:
        if self.kind == "gaussian_pdf":
            return {"kind": self.kind, "sigma": self.sigma}
        return {"kind": self.kind, "width": self.width}


def profile_from_dict(d: dict) -> Profile:
    kind = d.get("kind")
    if kind == "gaussian_pdf":
        return Profile(kind, sigma=float(d.get("sigma", 1.0)))
    if kind in ("triangle", "indicator_box"):
        return Profile(kind, width=float(d.get("width", 1.0)))
    raise ConfigurationError(f"unknown profile {kind!r}")


@dataclass(frozen=True, eq=False)
class ClusterProfile(Representor):
    """Deterministic cluster field ``Q(t) = scale * c * q(t) * u``.

    ``q`` is the profile shape, ``u`` a unit vector with equal components and
    ``c`` makes the integral of ``||Q||^alpha`` over R^l equal to one. The
    normalization is checked by quadrature at construction; a ``scale``
    other than 1 breaks it on purpose and needs ``enforce_normalization=False``.
    """

    cfg: FieldConfig = FieldConfig()
    profile: Profile = Profile()
    scale: float = 1.0
    enforce_normalization: bool = True
    separant: PointSet = None  # type: ignore[assignment]
    normalization: float = field(init=False)
    constant: float = field(init=False)
    kind = "cluster_profile"

    def __post_init__(self):
        if self.separant is None:
            object.__setattr__(self, "separant", _default_separant(self.cfg))
        a, l = self.cfg.alpha, self.cfg.dim_l
        c = self.profile.power_integral_1d(a) ** (-l / a)
        object.__setattr__(self, "constant", c)
        check = (self.scale * c) ** a * self.profile.quadrature_power_integral_1d(a) ** l
        object.__setattr__(self, "normalization", check)
        if self.enforce_normalization and abs(check - 1.0) > 1e-6:
            raise ConfigurationError(
                f"cluster profile integrates to {check:.9g}, not 1 (scale={self.scale})"
            )

    @property
    def unit(self) -> np.ndarray:
        u = np.ones(self.cfg.dim_d)
        return u / norm_value(u, self.cfg)

    def evaluate(self, points) -> np.ndarray:
        """Q at an array of points of shape (..., l); returns (..., d)."""
        q = self.scale * self.constant * self.profile.shape(np.asarray(points, dtype=float))
        return q[..., None] * self.unit

    @property
    def origin_norm(self) -> float:  # type: ignore[override]
        return float(norm_value(self.evaluate(np.zeros(self.cfg.dim_l)), self.cfg))

    def sample(self, sites, n, rng=None, prefix=None) -> Sample:
        vals = self.evaluate(sites.points)
        return Sample(sites, np.broadcast_to(vals, (n,) + vals.shape).copy())

    def descriptor(self) -> dict:
        return {"kind": self.kind, "profile": self.profile.to_dict(), "scale": self.scale,
                "enforce_normalization": self.enforce_normalization}


def cluster_sample(sites: PointSet, Q: ClusterProfile | Profile, cfg: FieldConfig) -> PathSample:
    """Profile values at ``sites``."""
    if isinstance(Q, Profile):
        Q = ClusterProfile(cfg, Q)
    return PathSample(sites, Q.evaluate(sites.points))


# ---------------------------------------------------------------------------
# adapters


@dataclass(frozen=True, eq=False)
class ConstantRepresentor(Representor):
    """``Z(t) = value * u`` everywhere (a stationary degenerate representor)."""

    cfg: FieldConfig = FieldConfig()
    value: float = 1.0
    separant: PointSet = None  # type: ignore[assignment]
    kind = "constant"

    def __post_init__(self):
        if self.separant is None:
            object.__setattr__(self, "separant", _default_separant(self.cfg))

    @property
    def origin_norm(self) -> float:  # type: ignore[override]
        return float(self.value)

    def sample(self, sites, n, rng=None, prefix=None) -> Sample:
        u = np.ones(self.cfg.dim_d)
        u = u / norm_value(u, self.cfg)
        return Sample(sites, np.broadcast_to(self.value * u, (n, len(sites), self.cfg.dim_d)).copy())

    def descriptor(self) -> dict:
        return {"kind": self.kind, "value": self.value}


@dataclass(frozen=True, eq=False)
class ScaledRepresentor(Representor):
    """``c * Z`` for a positive constant ``c``."""

    base: Representor
    factor: float = 1.0
    kind = "scaled"

    def __post_init__(self):
        if not self.factor > 0:
            raise ConfigurationError("scale factor must be positive")

    @property
    def cfg(self) -> FieldConfig:  # type: ignore[override]
        return self.base.cfg

    @property
    def separant(self) -> PointSet:  # type: ignore[override]
        return self.base.separant

    @property
    def origin_norm(self):  # type: ignore[override]
        o = self.base.origin_norm
        return None if o is None else self.factor * o

    def sample(self, sites, n, rng, prefix=None) -> Sample:
        s = self.base.sample(sites, n, rng, prefix=prefix)
        return Sample(sites, self.factor * s.values, s.weights, s.diagnostics)

    def descriptor(self) -> dict:
        return {"kind": self.kind, "factor": self.factor, "base": self.base.descriptor()}


def signed_split(path: PathSample) -> PathSample:
    """Positive and negative parts side by side: d columns become 2d."""
    v = path.values
    return PathSample(path.sites, np.concatenate([np.maximum(v, 0.0), np.maximum(-v, 0.0)], axis=-1))


def _split_values(v: np.ndarray) -> np.ndarray:
    return np.concatenate([np.maximum(v, 0.0), np.maximum(-v, 0.0)], axis=-1)


@dataclass(frozen=True, eq=False)
class SignedSplitRepresentor(Representor):
    """Nonnegative ``2d``-dimensional version of a signed representor.

    With the sup norm and ``d = 1`` the norm of the split equals ``|Z|``.
    """

    base: Representor
    kind = "signed_split"

    @property
    def cfg(self) -> FieldConfig:  # type: ignore[override]
        return self.base.cfg.with_dim_d(2 * self.base.cfg.dim_d)

    @property
    def separant(self) -> PointSet:  # type: ignore[override]
        return self.base.separant

    def sample(self, sites, n, rng, prefix=None) -> Sample:
        s = self.base.sample(sites, n, rng, prefix=prefix)
        return Sample(sites, _split_values(s.values), s.weights, s.diagnostics)

    def descriptor(self) -> dict:
        return {"kind": self.kind, "base": self.base.descriptor()}


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class ValidationReport:
    margin: MCEstimate
    margin_z: float
    margin_pass: bool
    n_positive_sup: int
    n: int
    positivity_pass: bool
    representor: dict

    @property
    def passed(self) -> bool:
        return self.margin_pass and self.positivity_pass

    def to_dict(self) -> dict:
        return {
            "representor": self.representor,
            "margin": self.margin.to_dict(),
            "margin_z": self.margin_z,
            "margin_pass": self.margin_pass,
            "n_positive_sup": self.n_positive_sup,
            "n": self.n,
            "positivity_pass": self.positivity_pass,
            "verdict": "pass" if self.passed else "fail",
        }


def validate_representor(r, n: int, rng: np.random.Generator, n_se: float = 4.0) -> ValidationReport:
    """Monte Carlo check of ``E||Z(0)||^alpha = 1`` and of positive sup on the separant.

    The margin passes when the estimate is within ``n_se`` standard errors
    of 1 (exact equality when the standard error is 0). Positivity must
    hold on every draw.
    """
    if n < 1000:
        raise ConfigurationError("validate_representor needs n >= 1000")
    cfg = r.cfg
    origin = PointSet.origin(cfg.dim_l)
    sites = PointSet(np.concatenate([origin.points, r.separant.points]))
    s = r.sample(sites, n, rng)
    w = s.weights_or_ones()
    norms = norm_value(s.values, cfg)
    margin = MCEstimate.from_samples(w * norms[:, 0] ** cfg.alpha)
    se = margin.se
    if se > 0:
        z = (margin.mean - 1.0) / se
    else:
        z = 0.0 if abs(margin.mean - 1.0) <= 1e-12 else math.inf
    sup_pos = np.max(norms[:, 1:], axis=1) > 0 if len(r.separant) else np.zeros(n, bool)
    npos = int(np.sum(sup_pos))
    return ValidationReport(margin, float(z), bool(abs(z) <= n_se), npos, n, npos == n,
                            r.descriptor())

