"""Tilting, tail fields and shift-randomized representors.

All constructions evaluate one base realization jointly at every site
they need (origin, quadrature nodes, shifted targets), so that a
normalizing integral and the output values come from the same draw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import FieldConfig, PathSample, PointSet, Sample, norm_value, shift_points, union_many
from .errors import ConfigurationError, DegenerateTiltingError, PositivityError
from .functionals import QuadratureRule, ShiftDensity
from .representors import ClusterProfile, Representor, integer_lattice

TILT_MODES = ("exact", "sir", "weighted")
VARIANTS = ("zn", "zn_prime_finiteS", "zn_boll3", "zn_prime_boll3b", "zn_second", "cluster")

# variants normalized by the plain integral S over the window
_FIXED_NODE_VARIANTS = ("zn", "zn_prime_finiteS")
# variants whose input is the local field rather than the representor
_THETA_VARIANTS = ("zn_prime_finiteS", "zn_prime_boll3b", "zn_second")

_SIR_BLOCK_ELEMENTS = 2_000_000


def _with_origin(sites: PointSet) -> tuple[PointSet, np.ndarray, int]:
    """``sites`` followed by the origin if missing; returns (union, site map, origin index)."""
    full, (i_sites, i_origin) = union_many(sites, PointSet.origin(sites.dim_l))
    return full, i_sites, int(i_origin[0])


# ---------------------------------------------------------------------------
# tilting


@dataclass(frozen=True, eq=False)
class TiltedSampler:
    """Local field ``Theta = Z / ||Z(0)||`` under the law tilted by ``||Z(0)||^alpha``.

    ``exact`` divides by the deterministic origin norm of the base;
    ``sir`` resamples one path from a pool of ``pool_size`` draws with
    probability proportional to the tilting weight; ``weighted`` returns
    every draw with its weight. In weighted mode, draws with weight 0 are
    kept as zero paths carrying weight 0, so averages of ``weight * f``
    stay unbiased.
    """

    base: Representor
    mode: str = "weighted"
    pool_size: int = 64
    kind = "theta"

    def __post_init__(self):
        if self.mode not in TILT_MODES:
            raise ConfigurationError(f"unknown tilting mode {self.mode!r}; expected one of {TILT_MODES}")
        if self.mode == "exact":
            o = getattr(self.base, "origin_norm", None)
            if o is None or not o > 0:
                raise ConfigurationError(
                    f"exact tilting needs a deterministic positive origin norm; "
                    f"{self.base.descriptor()['kind']} has none"
                )
        if self.pool_size < 1:
            raise ConfigurationError("sir pool size must be positive")

    @property
    def cfg(self) -> FieldConfig:
        return self.base.cfg

    @property
    def separant(self) -> PointSet:
        return self.base.separant

    @property
    def origin_norm(self) -> float:
        return 1.0

    @property
    def weighted(self) -> bool:
        return self.mode == "weighted"

    def _tilt(self, values: np.ndarray, base_w: np.ndarray | None, i_origin: int):
        """Normalized values and tilting weights ``w_base * ||Z(0)||^alpha``."""
        cfg = self.cfg
        r = norm_value(values[:, i_origin, :], cfg)
        w = np.power(r, cfg.alpha)
        if base_w is not None:
            w = w * base_w
        pos = r > 0
        theta = np.zeros_like(values)
        theta[pos] = values[pos] / r[pos, None, None]
        w = np.where(pos, w, 0.0)
        return theta, w

    def sample(self, sites: PointSet, n: int, rng: np.random.Generator,
               prefix: int | None = None) -> Sample:
        full, i_sites, i0 = _with_origin(sites)
        if self.mode == "exact":
            s = self.base.sample(full, n, rng, prefix=prefix)
            if s.weights is not None:
                raise ConfigurationError("exact tilting of a weighted source is not defined")
            vals = s.values / self.base.origin_norm
            return Sample(sites, vals[:, i_sites, :], None, dict(s.diagnostics))
        if self.mode == "weighted":
            s = self.base.sample(full, n, rng, prefix=prefix)
            theta, w = self._tilt(s.values, s.weights, i0)
            return Sample(sites, theta[:, i_sites, :], w, dict(s.diagnostics))
        return self._sample_sir(full, i_sites, i0, sites, n, rng, prefix)

    def _sample_sir(self, full, i_sites, i0, sites, n, rng, prefix) -> Sample:
        M = self.pool_size
        per_path = M * len(full) * self.cfg.dim_d
        block = max(1, _SIR_BLOCK_ELEMENTS // max(per_path, 1))
        out = np.empty((n, len(sites), self.cfg.dim_d))
        done = 0
        while done < n:
            b = min(block, n - done)
            s = self.base.sample(full, b * M, rng, prefix=prefix)
            theta, w = self._tilt(s.values, s.weights, i0)
            theta = theta.reshape(b, M, len(full), -1)
            w = w.reshape(b, M)
            tot = w.sum(axis=1)
            if np.any(tot <= 0):
                raise DegenerateTiltingError(
                    f"all {M} tilting weights in a pool are zero for base "
                    f"{self.base.descriptor()['kind']}"
                )
            cdf = np.cumsum(w, axis=1) / tot[:, None]
            u = rng.random(b)
            pick = np.minimum((cdf < u[:, None]).sum(axis=1), M - 1)
            out[done:done + b] = theta[np.arange(b), pick][:, i_sites, :]
            done += b
        return Sample(sites, out)

    def descriptor(self) -> dict:
        d = {"kind": self.kind, "mode": self.mode, "base": self.base.descriptor()}
        if self.mode == "sir":
            d["pool_size"] = self.pool_size
        return d


def sample_theta(sites: PointSet, t: TiltedSampler, rng: np.random.Generator):
    """One local-field draw; weighted mode returns ``(path, weight)``."""
    s = t.sample(sites, 1, rng)
    if t.weighted:
        return s.path(0), float(s.weights[0])
    return s.path(0)


# ---------------------------------------------------------------------------
# tail field


@dataclass(frozen=True)
class ParetoMultiplier:
    """``R = U^(-1/alpha)`` with ``U`` uniform on (0, 1]; ``P(R > s) = s^-alpha``."""

    alpha: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigurationError("alpha must be positive")

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        u = 1.0 - rng.random(n)
        return np.power(u, -1.0 / self.alpha)


@dataclass(frozen=True, eq=False)
class TailSampler:
    """Tail field ``Y = R * Theta`` with ``R`` Pareto and independent of ``Theta``."""

    theta: TiltedSampler
    kind = "tail"

    @property
    def cfg(self) -> FieldConfig:
        return self.theta.cfg

    @property
    def separant(self) -> PointSet:
        return self.theta.separant

    @property
    def weighted(self) -> bool:
        return self.theta.weighted

    def sample(self, sites: PointSet, n: int, rng: np.random.Generator,
               prefix: int | None = None) -> Sample:
        s = self.theta.sample(sites, n, rng, prefix=prefix)
        r = ParetoMultiplier(self.cfg.alpha).sample(n, rng)
        return Sample(sites, r[:, None, None] * s.values, s.weights, s.diagnostics)

    def descriptor(self) -> dict:
        return {"kind": self.kind, "theta": self.theta.descriptor()}


def sample_tail_Y(sites: PointSet, t: TiltedSampler, rng: np.random.Generator):
    """One tail-field draw; weighted mode returns ``(path, weight)``."""
    s = TailSampler(t).sample(sites, 1, rng)
    if t.weighted:
        return s.path(0), float(s.weights[0])
    return s.path(0)


# ---------------------------------------------------------------------------
# shift-randomized representors


@dataclass(eq=False)
class ShiftTransform(Representor):
    """Representor obtained by a random lattice shift ``N ~ gamma`` and renormalization.

    ``base`` is the representor (variants ``zn``, ``zn_boll3``), the local
    field (``zn_prime_*``, ``zn_second``; a plain representor is tilted
    automatically) or a cluster profile (``cluster``). Shifts are snapped
    to the lattice ``rule.step * Z^l`` and ``gamma(N)`` is the snapped
    shift's probability mass divided by the cell volume, which makes the
    discrete construction exact up to window truncation.

    For ``zn`` and ``zn_prime_finiteS`` a pilot run on a fixed seed checks
    that the window captures the integral: the mean of
    ``1 - S_window / S_doubled_window`` must be below ``tail_tolerance``.
    """

    base: object
    density: ShiftDensity
    rule: QuadratureRule
    variant: str = "zn"
    pilot_n: int = 1000
    pilot_seed: int = 20240917
    tail_tolerance: float = 0.01
    check_tail: bool = True
    _tail: dict | None = field(default=None, repr=False)
    kind = "transformed"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown transform variant {self.variant!r}; expected one of {VARIANTS}")
        if self.variant == "cluster":
            if not isinstance(self.base, ClusterProfile):
                raise ConfigurationError("the cluster variant needs a cluster profile base")
        elif self.variant in _THETA_VARIANTS:
            if not isinstance(self.base, TiltedSampler):
                mode = "exact" if getattr(self.base, "origin_norm", None) else "weighted"
                self.base = TiltedSampler(self.base, mode)
        elif isinstance(self.base, (TiltedSampler, ClusterProfile)):
            raise ConfigurationError(f"variant {self.variant} needs a representor base")
        if self.rule.window.dim_l != self.base.cfg.dim_l:
            raise ConfigurationError("quadrature rule and field have different parameter dimension")
        if self.variant in _FIXED_NODE_VARIANTS and not self.rule.contains_origin_node:
            raise ConfigurationError("the quadrature rule must have an odd number of cells per axis")

    @property
    def cfg(self) -> FieldConfig:
        return self.base.cfg

    @property
    def separant(self) -> PointSet:
        # shifted fields live anywhere in the window, so witness positivity there
        return integer_lattice(self.rule.window.half_width, self.cfg.dim_l)

    @property
    def weighted(self) -> bool:
        return bool(getattr(self.base, "weighted", False))

    @property
    def step(self) -> float:
        return self.rule.step

    # -- truncation pilot --------------------------------------------------

    def tail_diagnostic(self) -> dict:
        """Window-truncation pilot; cached on the instance."""
        if self._tail is not None:
            return self._tail
        if self.variant not in _FIXED_NODE_VARIANTS:
            self._tail = {}
            return self._tail
        rng = np.random.Generator(np.random.Philox(self.pilot_seed))
        l = self.rule.window.dim_l
        n_half = (self.rule.cells_per_axis - 1) // 2
        big = QuadratureRule.lattice(self.step, 2 * n_half + 1, l)
        inner = self.rule.window.contains(big.nodes.points)
        s = self.base.sample(big.nodes, self.pilot_n, rng, prefix=len(big.nodes))
        p = np.power(norm_value(s.values, self.cfg), self.cfg.alpha)
        s_big = p @ big.weights
        s_in = p[:, inner] @ big.weights[inner]
        w = s.weights_or_ones()
        ok = (s_big > 0) & (w > 0)
        frac = np.zeros_like(s_big)
        frac[ok] = 1.0 - s_in[ok] / s_big[ok]
        mean = float(np.sum(w[ok] * frac[ok]) / np.sum(w[ok])) if np.any(ok) else math.nan
        self._tail = {"tail_fraction": mean, "tail_window": self.rule.window.half_width,
                      "tail_pilot_n": self.pilot_n}
        return self._tail

    def check_truncation(self) -> dict:
        diag = self.tail_diagnostic()
        if self.check_tail and diag and not diag["tail_fraction"] < self.tail_tolerance:
            raise ConfigurationError(
                f"window half-width {self.rule.window.half_width} misses "
                f"{100 * diag['tail_fraction']:.2f}% of the integral (tolerance "
                f"{100 * self.tail_tolerance:.2f}%); enlarge the window"
            )
        return diag

    # -- sampling ------------------------------------------------------------

    def sample(self, sites: PointSet, n: int, rng: np.random.Generator,
               prefix: int | None = None) -> Sample:
        self.check_truncation()
        diag = {}
        l = self.cfg.dim_l
        raw = self.density.sample(n, rng, l)
        shifts = ShiftDensity.snap(raw, self.step)
        diag["max_snap_error"] = float(np.max(np.abs(raw - shifts))) if n else 0.0
        uniq, inv = np.unique(shifts, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        log_gamma = self.density.log_lattice_pdf(uniq, self.step)
        out = np.zeros((n, len(sites), self.cfg.dim_d))
        weights = np.ones(n) if self.weighted else None
        for g in range(len(uniq)):
            rows = np.flatnonzero(inv == g)
            vals, w = self._group(sites, uniq[g], float(log_gamma[g]), len(rows), rng)
            out[rows] = vals
            if weights is not None:
                weights[rows] = w
        diag["n_shift_groups"] = int(len(uniq))
        return Sample(sites, out, weights, diag)

    def _group(self, sites: PointSet, shift: np.ndarray, log_gamma: float, c: int,
               rng: np.random.Generator):
        cfg, a = self.cfg, self.cfg.alpha
        targets = shift_points(sites, shift)
        if self.variant == "cluster":
            q = self.base.evaluate(targets.points)
            return np.broadcast_to(math.exp(-log_gamma / a) * q, (c,) + q.shape), None

        origin = PointSet.origin(cfg.dim_l)
        if self.variant in _FIXED_NODE_VARIANTS:
            block = self.rule.nodes
            prefix = len(block)
            quad_w = self.rule.weights
        else:
            block = shift_points(self.rule.nodes, shift)
            prefix = 0
            quad_w = self.density.quadrature_weights(self.rule)
        full, (i_block, i_origin, i_target) = union_many(block, origin, targets)
        s = self.base.sample(full, c, rng, prefix=prefix)
        v = s.values
        w = s.weights
        live = np.ones(c, bool) if w is None else w > 0

        r0 = norm_value(v[:, i_origin[0], :], cfg)
        if self.variant in ("zn", "zn_boll3") and np.any(live & ~(r0 > 0)):
            raise PositivityError(
                f"variant {self.variant} needs ||Z(0)|| > 0 on every draw; "
                f"base {self.base.descriptor()['kind']} produced a zero"
            )
        nb = norm_value(v[:, i_block, :], cfg)
        if self.variant == "zn_second":
            den = (nb > 0).astype(float) @ quad_w
        else:
            den = np.power(nb, a) @ quad_w
        if np.any(live & ~(den > 0)):
            raise PositivityError(
                f"normalizing integral is zero for variant {self.variant}; the integral must be "
                f"positive almost surely, so the window or quadrature step is too coarse"
            )
        log_den = np.full(c, -np.inf)
        log_den[live] = np.log(den[live])
        if self.variant in _FIXED_NODE_VARIANTS:
            log_den = log_den + log_gamma
        scale = np.zeros(c)
        scale[live] = np.exp(-log_den[live] / a)
        if self.variant in ("zn", "zn_boll3"):
            scale = scale * r0
        return scale[:, None, None] * v[:, i_target, :], w

    def descriptor(self) -> dict:
        return {"kind": self.kind, "variant": self.variant, "base": self.base.descriptor(),
                "density": self.density.to_dict(), "rule": self.rule.to_dict()}


def transform_zn(base, density: ShiftDensity, rule: QuadratureRule, variant: str,
                 sites: PointSet, rng: np.random.Generator, check_tail: bool = True):
    """One realization of the shift-randomized representor at ``sites``.

    Weighted local-field inputs return ``(path, weight)``.
    """
    t = ShiftTransform(base, density, rule, variant, check_tail=check_tail)
    s = t.sample(sites, 1, rng)
    if s.weights is not None:
        return s.path(0), float(s.weights[0])
    return s.path(0)
