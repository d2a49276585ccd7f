"""Max-stable fields from the de Haan series and their exponent functionals.

``X(t) = max_i Z_i(t) / Gamma_i^(1/alpha)`` where ``Gamma_i`` are the
arrival times of a unit-rate Poisson process and ``Z_i`` iid copies of a
nonnegative representor. The finite-dimensional laws are
``P(X(t_i) <= x_i, all i) = exp(-V)`` with
``V = E max_i (||Z(t_i)|| / x_i)^alpha``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import PathSample, PointSet, Sample, norm_value, shift_points
from .errors import ConfigurationError, ContractError
from .estimate import MCEstimate
from .rng import DEFAULT_CHUNK
from .verify import IdentityReport, paired_report, source_diagnostics

TRUNCATION_WARN_LEVEL = 0.05


class TruncationWarning(UserWarning):
    """The de Haan series hit ``max_terms`` before the stopping rule fired."""


@dataclass(frozen=True)
class DeHaanConfig:
    """Series truncation settings.

    ``sup_bound_estimate`` bounds ``sup_t ||Z(t)||`` over the sampled sites
    for the stopping rule; when ``None`` it is estimated by a pilot run as
    the ``stop_quantile`` empirical quantile.
    """

    max_terms: int = 500
    stop_quantile: float = 0.9999
    sup_bound_estimate: float | None = None
    pilot_n: int = 20_000

    def __post_init__(self):
        if int(self.max_terms) != self.max_terms or self.max_terms < 1:
            raise ConfigurationError("max_terms must be a positive integer")
        if not 0 < self.stop_quantile < 1:
            raise ConfigurationError("stop_quantile must lie in (0, 1)")
        if self.sup_bound_estimate is not None and not self.sup_bound_estimate > 0:
            raise ConfigurationError("sup_bound_estimate must be positive")

    def to_dict(self) -> dict:
        return {"max_terms": self.max_terms, "stop_quantile": self.stop_quantile,
                "sup_bound_estimate": self.sup_bound_estimate, "pilot_n": self.pilot_n}


def pilot_sup_bound(rep, sites: PointSet, n: int, quantile: float,
                    rng: np.random.Generator) -> dict:
    """Empirical quantile and moment of ``sup_t ||Z(t)||`` over ``sites``."""
    s = rep.sample(sites, n, rng)
    sup = np.max(norm_value(s.values, rep.cfg), axis=1)
    return {"sup_bound": float(np.quantile(sup, quantile)),
            "sup_moment": float(np.mean(sup ** rep.cfg.alpha))}


def _check_source(rep):
    if getattr(rep, "weighted", False):
        raise ContractError("the de Haan series needs an unweighted representor")


def dehaan_batch(sites: PointSet, rep, dcfg: DeHaanConfig, n: int,
                 rng: np.random.Generator) -> Sample:
    """``n`` independent max-stable paths; per-path diagnostics in ``diagnostics``.

    Each path accumulates terms until ``Gamma_i^(-1/alpha) * sup_bound`` drops
    below its current minimum value over sites and components, or until
    ``max_terms``. The diagnostic is that ratio at the last term; values
    above 0.05 at ``max_terms`` raise a :class:`TruncationWarning`.
    """
    _check_source(rep)
    a = rep.cfg.alpha
    diag: dict = {}
    bound = dcfg.sup_bound_estimate
    if bound is None:
        pilot = pilot_sup_bound(rep, sites, dcfg.pilot_n, dcfg.stop_quantile, rng)
        bound = pilot["sup_bound"]
        diag.update(pilot)
    m, d = len(sites), rep.cfg.dim_d
    x = np.zeros((n, m, d))
    gamma = np.zeros(n)
    terms = np.zeros(n, dtype=np.int64)
    active = np.arange(n)
    ratio = np.full(n, np.inf)
    for _ in range(dcfg.max_terms):
        if active.size == 0:
            break
        gamma[active] += rng.standard_exponential(active.size)
        z = rep.sample(sites, active.size, rng).values
        if np.any(z < 0):
            raise ContractError("de Haan inputs must be nonnegative; apply signed_split first")
        scale = np.power(gamma[active], -1.0 / a)
        cur = np.maximum(x[active], scale[:, None, None] * z)
        x[active] = cur
        terms[active] += 1
        low = np.min(cur.reshape(active.size, -1), axis=1) if m else np.ones(active.size)
        with np.errstate(divide="ignore"):
            ratio[active] = np.where(low > 0, scale * bound / np.where(low > 0, low, 1.0), np.inf)
        active = active[ratio[active] >= 1.0]
    unfinished = np.zeros(n, bool)
    unfinished[active] = True
    warn = unfinished & (ratio > TRUNCATION_WARN_LEVEL)
    diag.update({
        "sup_bound": float(bound),
        "truncation_diag": ratio,
        "terms": terms,
        "max_truncation_diag": float(np.max(ratio)) if n else 0.0,
        "n_truncation_warnings": int(np.sum(warn)),
    })
    if np.any(warn):
        warnings.warn(
            f"{int(np.sum(warn))} of {n} de Haan paths stopped at max_terms={dcfg.max_terms} "
            f"with truncation diagnostic above {TRUNCATION_WARN_LEVEL}",
            TruncationWarning, stacklevel=2)
    return Sample(sites, x, None, diag)


def dehaan_sample(sites: PointSet, rep, dcfg: DeHaanConfig,
                  rng: np.random.Generator) -> tuple[PathSample, float]:
    """One max-stable path and its truncation diagnostic."""
    s = dehaan_batch(sites, rep, dcfg, 1, rng)
    return s.path(0), float(s.diagnostics["truncation_diag"][0])


# ---------------------------------------------------------------------------
# exponent functional


@dataclass(frozen=True, eq=False)
class ExponentQuery:
    sites: PointSet
    x: tuple

    def __post_init__(self):
        x = tuple(float(v) for v in np.atleast_1d(self.x))
        if len(x) != len(self.sites):
            raise ConfigurationError("one threshold per site is required")
        if not all(v > 0 for v in x):
            raise ConfigurationError("thresholds must be positive")
        object.__setattr__(self, "x", x)

    def to_dict(self) -> dict:
        return {"sites": self.sites.to_list(), "x": list(self.x)}


@dataclass(eq=False)
class ExponentSummand:
    """Picklable generator of ``w * max_i (||Z(t_i)|| / x_i)^alpha``."""

    rep: object
    query: ExponentQuery

    def __call__(self, size: int, rng: np.random.Generator):
        s = self.rep.sample(self.query.sites, size, rng)
        a = self.rep.cfg.alpha
        r = norm_value(s.values, self.rep.cfg) / np.asarray(self.query.x)
        out = np.max(np.power(r, a), axis=1) if len(self.query.sites) else np.zeros(size)
        if s.weights is not None:
            out = np.where(s.weights > 0, s.weights * out, 0.0)
        return out, s.diagnostics


def exponent_estimate(rep, q: ExponentQuery, n: int, rng: np.random.Generator) -> MCEstimate:
    """Monte Carlo estimate of ``V = E max_i (||Z(t_i)|| / x_i)^alpha``."""
    if n < 1000:
        raise ConfigurationError("exponent_estimate needs n >= 1000")
    out, _ = ExponentSummand(rep, q)(n, rng)
    return MCEstimate.from_samples(out)


def fidi_cdf(v: MCEstimate | float) -> float:
    """``exp(-V)``: the joint CDF of the max-stable field at the query."""
    return math.exp(-(v.mean if isinstance(v, MCEstimate) else float(v)))


def stationarity_check(rep_a, rep_b, sites: PointSet, h, x, n: int, seed: int,
                       workers: int = 1, confidence: float = 0.99,
                       chunk: int = DEFAULT_CHUNK) -> IdentityReport:
    """Compare exponent functionals of ``rep_a`` at ``sites`` and ``rep_b`` at ``sites + h``.

    Equal exponent functionals at shifted sites mean equal
    finite-dimensional laws of the two max-stable fields.
    """
    if n < 1000:
        raise ConfigurationError("stationarity_check needs n >= 1000")
    h = np.atleast_1d(np.asarray(h, dtype=float))
    qa = ExponentQuery(sites, x)
    qb = ExponentQuery(shift_points(sites, -h), x)
    diag = {}
    for name, src in (("left", rep_a), ("right", rep_b)):
        diag.update({f"{name}_{k}": v for k, v in source_diagnostics(src).items()})
    spec = {"identity": "stationarity", "sites": sites.to_list(), "h": h.tolist(),
            "x": list(qa.x), "n": n, "seed": seed, "confidence": confidence,
            "workers": workers, "chunk": chunk,
            "left_source": rep_a.descriptor(), "right_source": rep_b.descriptor()}
    return paired_report("stationarity", {"kind": "exponent", "x": list(qa.x)},
                         ExponentSummand(rep_a, qa), ExponentSummand(rep_b, qb),
                         h=h.tolist(), x=None, n=n, seed=seed, workers=workers, chunk=chunk,
                         confidence=confidence, spec=spec, diagnostics=diag)
