"""Homogeneous functionals of path samples and the integral functionals.

A functional is evaluated on the values of a path at its own finite list
of sites (``F.sites``); to evaluate ``F(B^h Z)`` one samples ``Z`` at
``shift_points(F.sites, h)`` and applies ``F.evaluate`` to those values.
All evaluations are vectorized over any leading batch axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from .core import FieldConfig, PathSample, PointSet, Window, norm_value, union_many
from .errors import ConfigurationError, ContractError
from .estimate import MCEstimate

# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Midpoint rule on a window: ``K`` equal cells per axis, weight ``step^l``.

    When ``K`` is odd the nodes form the lattice ``center + step * Z^l`` and
    include the window center; :meth:`lattice` builds such rules.
    """

    window: Window
    step: float
    nodes: PointSet = field(init=False)
    weights: np.ndarray = field(init=False)

    def __post_init__(self):
        m, s = self.window.half_width, self.step
        if not (np.isfinite(s) and s > 0):
            raise ConfigurationError(f"quadrature step must be positive, got {s}")
        ratio = 2.0 * m / s
        k = int(round(ratio))
        if k < 1 or abs(ratio - k) > 1e-9 * max(1.0, ratio):
            raise ConfigurationError(
                f"window width {2 * m} is not an integer multiple of step {s}"
            )
        axis = (np.arange(k) - (k - 1) / 2.0) * s
        grids = np.meshgrid(*([axis] * self.window.dim_l), indexing="ij")
        pts = np.stack([g.reshape(-1) for g in grids], axis=1) + self.window.center_array
        w = np.full(pts.shape[0], s ** self.window.dim_l)
        w.setflags(write=False)
        object.__setattr__(self, "nodes", PointSet(pts))
        object.__setattr__(self, "weights", w)

    @classmethod
    def lattice(cls, step: float, n_half: int, dim_l: int = 1) -> "QuadratureRule":
        """Rule with nodes ``step * k`` for ``|k| <= n_half`` in each axis."""
        return cls(Window((n_half + 0.5) * step, dim_l), step)

    @property
    def cells_per_axis(self) -> int:
        return int(round(2.0 * self.window.half_width / self.step))

    @property
    def contains_origin_node(self) -> bool:
        return bool(np.any(np.all(self.nodes.points == 0.0, axis=1)))

    def refined(self) -> "QuadratureRule":
        return QuadratureRule(self.window, self.step / 2.0)

    def on_window(self, window: Window) -> "QuadratureRule":
        return QuadratureRule(window, self.step)

    def to_dict(self) -> dict:
        d = {"half_width": self.window.half_width, "step": self.step}
        if self.window.center is not None:
            d["center"] = list(self.window.center)
        return d


def rule_from_dict(d: dict, dim_l: int = 1) -> QuadratureRule:
    center = d.get("center")
    return QuadratureRule(Window(float(d["half_width"]), dim_l, tuple(center) if center else None),
                          float(d["step"]))


# ---------------------------------------------------------------------------
# shift densities


def _log_interval_mass(dist, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """log P(a < X <= b) for a symmetric continuous law, accurate in both tails."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.empty(np.broadcast(a, b).shape)
    a, b = np.broadcast_to(a, out.shape), np.broadcast_to(b, out.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        right = a >= 0
        left = b <= 0
        mid = ~(right | left)
        if np.any(right):
            la, lb = dist.logsf(a[right]), dist.logsf(b[right])
            out[right] = la + np.log1p(-np.exp(lb - la))
        if np.any(left):
            la, lb = dist.logsf(-b[left]), dist.logsf(-a[left])
            out[left] = la + np.log1p(-np.exp(lb - la))
        if np.any(mid):
            out[mid] = np.log1p(-(dist.sf(b[mid]) + dist.cdf(a[mid])))
    out[~np.isfinite(out)] = -np.inf
    return out


@dataclass(frozen=True)
class ShiftDensity:
    """Law of the random shift ``N``, a product of iid symmetric coordinates.

    ``gaussian`` and ``student_t`` have continuous strictly positive
    densities. ``uniform_window`` vanishes outside ``[-m, m]^l`` and is only
    accepted with ``allow_nonpositive=True``.
    """

    kind: str = "gaussian"
    sigma: float = 1.0
    df: float = 3.0
    half_width: float = 1.0
    allow_nonpositive: bool = False

    def __post_init__(self):
        if self.kind not in ("gaussian", "student_t", "uniform_window"):
            raise ConfigurationError(f"unknown shift density {self.kind!r}")
        if self.kind == "uniform_window" and not self.allow_nonpositive:
            raise ConfigurationError(
                "uniform_window is not strictly positive on R^l; pass allow_nonpositive=True"
            )
        if not self.sigma > 0 or not self.df > 0 or not self.half_width > 0:
            raise ConfigurationError("shift density parameters must be positive")

    @property
    def strictly_positive(self) -> bool:
        return self.kind != "uniform_window"

    @property
    def _dist(self):
        if self.kind == "gaussian":
            return stats.norm(0.0, self.sigma)
        if self.kind == "student_t":
            return stats.t(self.df, 0.0, self.sigma)
        return stats.uniform(-self.half_width, 2.0 * self.half_width)

    def pdf(self, t) -> np.ndarray:
        t = np.atleast_2d(np.asarray(t, dtype=float))
        return np.prod(self._dist.pdf(t), axis=-1)

    def sample(self, n: int, rng: np.random.Generator, dim_l: int = 1) -> np.ndarray:
        """Inverse-CDF draws, shape (n, dim_l)."""
        u = rng.random((n, dim_l))
        u[u == 0.0] = 2.0 ** -54
        return self._dist.ppf(u)

    @staticmethod
    def snap(shifts: np.ndarray, step: float) -> np.ndarray:
        """Nearest point of the lattice ``step * Z^l``."""
        return np.round(np.asarray(shifts, dtype=float) / step) * step

    def log_lattice_pdf(self, t, step: float) -> np.ndarray:
        """log of the cell-averaged density: P(N in t + [-step/2, step/2)^l) / step^l.

        This is exactly the probability mass function of the snapped shift,
        divided by the cell volume.
        """
        t = np.atleast_2d(np.asarray(t, dtype=float))
        if self.kind == "uniform_window":
            d = self._dist
            mass = d.cdf(t + step / 2) - d.cdf(t - step / 2)
            with np.errstate(divide="ignore"):
                lm = np.log(mass)
        else:
            lm = _log_interval_mass(self._dist, t - step / 2, t + step / 2)
        return np.sum(lm, axis=-1) - t.shape[-1] * math.log(step)

    def lattice_pdf(self, t, step: float) -> np.ndarray:
        return np.exp(self.log_lattice_pdf(t, step))

    def quadrature_weights(self, rule: QuadratureRule) -> np.ndarray:
        """Cell masses ``gamma(dt)`` of the rule's cells."""
        return rule.weights * self.lattice_pdf(rule.nodes.points, rule.step)

    def to_dict(self) -> dict:
        if self.kind == "gaussian":
            return {"kind": "gaussian", "sigma": self.sigma}
        if self.kind == "student_t":
            return {"kind": "student_t", "df": self.df, "scale": self.sigma}
        return {"kind": "uniform_window", "half_width": self.half_width,
                "allow_nonpositive": self.allow_nonpositive}


def density_from_dict(d: dict | None) -> ShiftDensity | None:
    if d is None:
        return None
    kind = d.get("kind")
    if kind == "gaussian":
        return ShiftDensity("gaussian", sigma=float(d.get("sigma", 1.0)))
    if kind == "student_t":
        return ShiftDensity("student_t", sigma=float(d.get("scale", 1.0)), df=float(d.get("df", 3.0)))
    if kind == "uniform_window":
        return ShiftDensity("uniform_window", half_width=float(d.get("half_width", 1.0)),
                            allow_nonpositive=bool(d.get("allow_nonpositive", False)))
    raise ConfigurationError(f"unknown shift density {kind!r}")


# ---------------------------------------------------------------------------
# integral functionals


def _aligned_values(path, rule: QuadratureRule) -> np.ndarray:
    if isinstance(path, PathSample):
        if path.sites != rule.nodes:
            raise ContractError("path sites do not coincide with the quadrature nodes")
        return path.values
    vals = np.asarray(path, dtype=float)
    if vals.ndim < 2 or vals.shape[-2] != len(rule.nodes):
        raise ContractError(
            f"values of shape {vals.shape} are not aligned with {len(rule.nodes)} nodes"
        )
    return vals


def integral_S(path, rule: QuadratureRule, cfg: FieldConfig,
               density: ShiftDensity | None = None):
    """Quadrature of ``||f(t)||^alpha`` (optionally against ``gamma(dt)``).

    ``path`` is a :class:`PathSample` on ``rule.nodes`` or an array of shape
    ``(..., m, d)``; the result has the leading shape.
    """
    vals = _aligned_values(path, rule)
    w = rule.weights if density is None else density.quadrature_weights(rule)
    out = np.power(norm_value(vals, cfg), cfg.alpha) @ w
    return float(out) if np.ndim(out) == 0 else out


def sojourn_B(path, rule: QuadratureRule, cfg: FieldConfig):
    """Quadrature of the indicator ``||f(t)|| > 1``."""
    vals = _aligned_values(path, rule)
    out = (norm_value(vals, cfg) > 1.0).astype(float) @ rule.weights
    return float(out) if np.ndim(out) == 0 else out


def mc_integral(w_eval: Callable[[np.ndarray], np.ndarray], window: Window, n: int,
                rng: np.random.Generator) -> MCEstimate:
    """Uniform-sampling estimate of the integral of ``w_eval`` over ``window``.

    The estimate is ``vol(window)/n * sum_j w_eval(t_j)`` with ``t_j`` iid
    uniform on the window; the standard error comes from the summands.
    """
    if n < 1:
        raise ContractError("mc_integral needs n >= 1")
    l = window.dim_l
    t = window.center_array + window.half_width * (2.0 * rng.random((n, l)) - 1.0)
    vals = np.asarray(w_eval(t), dtype=float).reshape(n)
    return MCEstimate.from_samples(window.volume * vals)


# ---------------------------------------------------------------------------
# homogeneous functionals


@dataclass(frozen=True, eq=False)
class HomogeneousFunctional:
    """A functional with values in [0, inf] evaluated at finitely many sites.

    ``degree`` is the homogeneity degree, or ``None`` for functionals that
    are not homogeneous (allowed only in tail-field identities).
    """

    degree: float | None
    sites: PointSet
    descriptor: dict
    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    bounded: bool = False

    def evaluate(self, values) -> np.ndarray:
        vals = np.asarray(values, dtype=float)
        if vals.shape[-2] != len(self.sites):
            raise ContractError(
                f"functional expects {len(self.sites)} sites, got values of shape {vals.shape}"
            )
        return self.fn(vals)

    def __call__(self, path: PathSample) -> float:
        idx = [path.sites.index_of(p) for p in self.sites.points]
        return float(self.evaluate(path.values[idx]))


def _pow_norm(vals: np.ndarray, cfg: FieldConfig) -> np.ndarray:
    return np.power(norm_value(vals, cfg), cfg.alpha)


def _safe_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """num / den with 0/0 := 0 and x/0 := inf for x > 0."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    out = np.zeros(np.broadcast(num, den).shape)
    pos = den > 0
    np.divide(num, den, out=out, where=pos)
    out = np.where(~pos & (num > 0), np.inf, out)
    return out


def _sites(raw, cfg: FieldConfig) -> PointSet:
    pts = np.asarray(raw, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, cfg.dim_l) if cfg.dim_l > 1 else pts.reshape(-1, 1)
    if pts.ndim != 2 or pts.shape[1] != cfg.dim_l:
        raise ConfigurationError(f"sites {raw!r} do not match parameter dimension {cfg.dim_l}")
    return PointSet(pts)


def _point(raw, cfg: FieldConfig) -> np.ndarray:
    p = np.asarray(raw, dtype=float).reshape(-1)
    if p.size != cfg.dim_l:
        raise ConfigurationError(f"site {raw!r} does not match parameter dimension {cfg.dim_l}")
    return p


def _level(raw) -> float:
    if isinstance(raw, str):
        if raw.lower() in ("inf", "infinity"):
            return math.inf
        raise ConfigurationError(f"bad level {raw!r}")
    return float(raw)


_OPS = {
    "eq": np.equal, "ne": np.not_equal, "gt": np.greater,
    "ge": np.greater_equal, "lt": np.less, "le": np.less_equal,
}


def builtin_functional(descriptor: dict, cfg: FieldConfig) -> HomogeneousFunctional:
    """Build a functional from a JSON-style descriptor.

    Kinds: ``constant``, ``weighted_max``, ``weighted_sum``, ``ratio``,
    ``s_gamma_quadrature``, ``bounded_zero_hom``, ``product``, ``quotient``,
    ``indicator``, ``threshold``, ``capped_norm``. Degree-0 ratios use the
    convention 0/0 = 0.
    """
    if not isinstance(descriptor, dict) or "kind" not in descriptor:
        raise ConfigurationError(f"functional descriptor needs a 'kind': {descriptor!r}")
    kind = descriptor["kind"]
    a = cfg.alpha

    if kind == "constant":
        value = float(descriptor.get("value", 1.0))
        if value < 0:
            raise ConfigurationError("constant functional must be nonnegative")
        return HomogeneousFunctional(
            0.0, PointSet.empty(cfg.dim_l), {"kind": kind, "value": value},
            lambda v: np.full(v.shape[:-2], value), bounded=True)

    if kind in ("weighted_max", "weighted_sum"):
        sites = _sites(descriptor["sites"], cfg)
        coeffs = np.asarray(descriptor.get("coeffs", [1.0] * len(sites)), dtype=float)
        if coeffs.shape != (len(sites),) or np.any(coeffs < 0):
            raise ConfigurationError(f"{kind} needs one nonnegative coefficient per site")
        desc = {"kind": kind, "sites": sites.to_list(), "coeffs": coeffs.tolist()}
        if kind == "weighted_max":
            def fn(v):
                return np.max(coeffs * _pow_norm(v, cfg), axis=-1)
        else:
            def fn(v):
                return _pow_norm(v, cfg) @ coeffs
        return HomogeneousFunctional(a, sites, desc, fn)

    if kind == "ratio":
        s = _point(descriptor["site"], cfg)
        others = _sites(descriptor["sites"], cfg)
        q = np.asarray(descriptor.get("weights", [1.0] * len(others)), dtype=float)
        if q.shape != (len(others),) or np.any(q < 0):
            raise ConfigurationError("ratio needs one nonnegative weight per site")
        sites, (i_s, i_o) = union_many(PointSet(s.reshape(1, -1)), others)
        desc = {"kind": kind, "site": s.tolist(), "sites": others.to_list(), "weights": q.tolist()}
        in_list = [j for j in range(len(others)) if int(i_o[j]) == int(i_s[0]) and q[j] > 0]

        def fn(v):
            p = _pow_norm(v, cfg)
            return _safe_ratio(p[..., i_s[0]], p[..., i_o] @ q)
        return HomogeneousFunctional(0.0, sites, desc, fn, bounded=bool(in_list))

    if kind == "s_gamma_quadrature":
        rule = rule_from_dict(descriptor["rule"], cfg.dim_l)
        dens = density_from_dict(descriptor.get("density"))
        w = rule.weights if dens is None else dens.quadrature_weights(rule)
        desc = {"kind": kind, "rule": rule.to_dict(), "density": None if dens is None else dens.to_dict()}
        return HomogeneousFunctional(a, rule.nodes, desc, lambda v: _pow_norm(v, cfg) @ w)

    if kind == "bounded_zero_hom":
        s = _point(descriptor["site"], cfg)
        u = _point(descriptor["other"], cfg)
        sites, (i_s, i_u) = union_many(PointSet(s.reshape(1, -1)), PointSet(u.reshape(1, -1)))
        desc = {"kind": kind, "site": s.tolist(), "other": u.tolist()}

        def fn(v):
            ns = norm_value(v[..., i_s[0], :], cfg)
            nu = norm_value(v[..., i_u[0], :], cfg)
            return _safe_ratio(ns, ns + nu)
        return HomogeneousFunctional(0.0, sites, desc, fn, bounded=True)

    if kind in ("product", "quotient"):
        if kind == "product":
            parts = [builtin_functional(f, cfg) for f in descriptor["factors"]]
            if not parts:
                raise ConfigurationError("product needs at least one factor")
        else:
            parts = [builtin_functional(descriptor["numerator"], cfg),
                     builtin_functional(descriptor["denominator"], cfg)]
        sites, maps = union_many(*[p.sites for p in parts])
        degs = [p.degree for p in parts]
        if any(d is None for d in degs):
            degree = None
        elif kind == "product":
            degree = float(sum(degs))
        else:
            degree = degs[0] - degs[1]
        if kind == "product":
            desc = {"kind": kind, "factors": [p.descriptor for p in parts]}

            def fn(v):
                out = parts[0].fn(v[..., maps[0], :])
                for p, mp in zip(parts[1:], maps[1:]):
                    out = out * p.fn(v[..., mp, :])
                return out
            bounded = all(p.bounded for p in parts)
        else:
            desc = {"kind": kind, "numerator": parts[0].descriptor,
                    "denominator": parts[1].descriptor}

            def fn(v):
                return _safe_ratio(parts[0].fn(v[..., maps[0], :]), parts[1].fn(v[..., maps[1], :]))
            bounded = False
        return HomogeneousFunctional(degree, sites, desc, fn, bounded=bounded)

    if kind == "indicator":
        inner = builtin_functional(descriptor["inner"], cfg)
        op = descriptor.get("op", "eq")
        if op not in _OPS:
            raise ConfigurationError(f"unknown comparison {op!r}")
        level = _level(descriptor.get("level", 0.0))
        cone = level == 0.0 or math.isinf(level)
        degree = 0.0 if inner.degree is not None and (inner.degree == 0 or cone) else None
        desc = {"kind": kind, "inner": inner.descriptor, "op": op,
                "level": "inf" if math.isinf(level) else level}
        cmp = _OPS[op]
        return HomogeneousFunctional(
            degree, inner.sites, desc,
            lambda v: cmp(inner.fn(v), level).astype(float), bounded=True)

    if kind == "threshold":
        s = _point(descriptor["site"], cfg)
        level = float(descriptor.get("level", 0.0))
        desc = {"kind": kind, "site": s.tolist(), "level": level}
        return HomogeneousFunctional(
            0.0 if level == 0.0 else None, PointSet(s.reshape(1, -1)), desc,
            lambda v: (norm_value(v[..., 0, :], cfg) > level).astype(float), bounded=True)

    if kind == "capped_norm":
        s = _point(descriptor["site"], cfg)
        cap = float(descriptor.get("cap", 1.0))
        if not cap > 0:
            raise ConfigurationError("capped_norm needs a positive cap")
        desc = {"kind": kind, "site": s.tolist(), "cap": cap}
        return HomogeneousFunctional(
            None, PointSet(s.reshape(1, -1)), desc,
            lambda v: np.minimum(norm_value(v[..., 0, :], cfg), cap), bounded=True)

    raise ConfigurationError(f"unknown functional kind {kind!r}")
