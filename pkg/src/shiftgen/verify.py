"""Paired Monte Carlo verification of functional identities.

Each identity has a left and a right expectation. Both are estimated from
independent random streams (lane 0 and lane 1 of the master seed) and
compared with a Welch z-test. A verdict is

* ``inconclusive`` when either standard error exceeds 20% of the larger
  absolute mean (or a heavy-tail pilot flags the summands),
* ``pass`` when ``|z|`` is below the two-sided critical value,
* ``fail`` otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .core import FieldConfig, PointSet, norm_value, shift_points, union_many
from .errors import ConfigurationError
from .estimate import MCEstimate, WelchResult, welch
from .functionals import builtin_functional
from .rng import DEFAULT_CHUNK, derive_rng_stream, run_many

IDENTITIES = ("boll", "boll22", "do20", "tyy")

LEFT_LANE, RIGHT_LANE = 0, 1
_PILOT_LANES = (2, 3)
PILOT_N = 10_000
KURTOSIS_LIMIT = 100.0
SE_RATIO_LIMIT = 0.2
ZERO_LEVEL = 1e-300


def source_diagnostics(src) -> dict:
    """Run pre-flight checks of a (possibly nested) source and collect their output."""
    out: dict = {}
    seen = set()
    stack = [src]
    while stack:
        s = stack.pop()
        if s is None or id(s) in seen:
            continue
        seen.add(id(s))
        check = getattr(s, "check_truncation", None)
        if callable(check):
            out.update(check())
        stack.extend(getattr(s, name, None) for name in ("base", "theta"))
    return out


def _describe(src) -> dict:
    return src.descriptor() if hasattr(src, "descriptor") else {"kind": type(src).__name__}


# ---------------------------------------------------------------------------
# summands


@dataclass(eq=False)
class IdentitySide:
    """Picklable summand generator for one side of an identity.

    The functional is rebuilt from its descriptor in each process.
    """

    identity: str
    side: str
    source: object
    functional: dict
    cfg: FieldConfig
    h: tuple
    x: float | None = None
    _plan: tuple | None = field(default=None, repr=False)

    def __getstate__(self):
        d = dict(self.__dict__)
        d["_plan"] = None
        return d

    def _build(self):
        F = builtin_functional(self.functional, self.cfg)
        h = np.asarray(self.h, dtype=float)
        zero = np.zeros_like(h)
        idt, left = self.identity, self.side == "left"
        # the side whose functional is applied to B^h of the field
        shifted = left if idt == "tyy" else not left
        f_sites = shift_points(F.sites, h) if shifted else F.sites
        if idt == "boll":
            extra = None
        elif idt in ("boll22", "do20"):
            extra = h if left else (zero if idt == "boll22" else -h)
        else:
            extra = -h if left else h
        if extra is None:
            sites, maps = union_many(f_sites)
            i_extra = None
        else:
            sites, (i_f, i_e) = union_many(f_sites, PointSet(extra.reshape(1, -1)))
            maps = [i_f]
            i_extra = int(i_e[0])
        self._plan = (F, sites, maps[0], i_extra)
        return self._plan

    @property
    def sites(self) -> PointSet:
        return (self._plan or self._build())[1]

    def __call__(self, size: int, rng: np.random.Generator):
        F, sites, i_f, i_e = self._plan or self._build()
        s = self.source.sample(sites, size, rng)
        v = s.values
        a = self.cfg.alpha
        idt, left = self.identity, self.side == "left"
        if idt == "tyy" and left:
            v = self.x * v
        g = F.evaluate(v[:, i_f, :])
        if i_e is None:
            factor = np.ones(size)
        else:
            ne = norm_value(v[:, i_e, :], self.cfg)
            if idt == "boll22" or (idt == "do20" and left):
                factor = np.power(ne, a)
            elif idt == "do20":
                factor = (ne > ZERO_LEVEL).astype(float)
            elif left:
                factor = (ne > 1.0).astype(float)
            else:
                factor = self.x ** a * (ne > self.x)
        with np.errstate(invalid="ignore"):
            out = np.where(factor > 0, factor * g, 0.0)
        if s.weights is not None:
            out = np.where(s.weights > 0, s.weights * out, 0.0)
        return out, s.diagnostics


# ---------------------------------------------------------------------------
# specs and reports


@dataclass
class IdentitySpec:
    identity: str
    functional: dict
    left_source: object
    right_source: object
    cfg: FieldConfig = FieldConfig()
    h: tuple = (0.0,)
    x: float | None = None
    n: int = 100_000
    confidence: float = 0.99
    seed: int = 0
    workers: int = 1
    chunk: int = DEFAULT_CHUNK
    lattice_step: float | None = None

    def __post_init__(self):
        if self.identity not in IDENTITIES:
            raise ConfigurationError(f"unknown identity {self.identity!r}; expected one of {IDENTITIES}")
        self.h = tuple(float(c) for c in np.atleast_1d(np.asarray(self.h, dtype=float)))
        if len(self.h) != self.cfg.dim_l:
            raise ConfigurationError(f"shift h={list(self.h)} does not have dimension {self.cfg.dim_l}")
        if self.lattice_step is not None:
            k = np.asarray(self.h) / self.lattice_step
            if not np.all(k == np.round(k)):
                raise ConfigurationError(f"shift h={list(self.h)} is not on the lattice of step {self.lattice_step}")
        if self.identity == "tyy":
            if self.x is None or not self.x > 0:
                raise ConfigurationError("the tail identity needs a level x > 0")
        if not 0 < self.confidence < 1:
            raise ConfigurationError("confidence must lie in (0, 1)")
        if self.n < 2:
            raise ConfigurationError("n must be at least 2")

    def to_dict(self) -> dict:
        return {
            "identity": self.identity, "functional": self.functional, "h": list(self.h),
            "x": self.x, "n": self.n, "confidence": self.confidence, "seed": self.seed,
            "workers": self.workers, "chunk": self.chunk, "lattice_step": self.lattice_step,
            "left_source": _describe(self.left_source), "right_source": _describe(self.right_source),
            "field": {"alpha": self.cfg.alpha, "dim_d": self.cfg.dim_d, "dim_l": self.cfg.dim_l,
                      "norm_kind": self.cfg.norm_kind.value},
        }


@dataclass
class IdentityReport:
    identity: str
    functional: dict
    h: list
    x: float | None
    n: int
    left: MCEstimate
    right: MCEstimate
    test: WelchResult
    verdict: str
    seed: int
    diagnostics: dict
    spec: dict

    @property
    def z(self) -> float:
        return self.test.z

    @property
    def p_value(self) -> float:
        return self.test.p_value

    def to_dict(self) -> dict:
        return {
            "identity": self.identity, "functional": self.functional, "h": self.h, "x": self.x,
            "n": self.n,
            "left": {"mean": self.left.mean, "se": self.left.se},
            "right": {"mean": self.right.mean, "se": self.right.se},
            "z": self.test.z, "p_value": self.test.p_value, "verdict": self.verdict,
            "seed": self.seed, "diagnostics": self.diagnostics, "spec": self.spec,
        }


def decide(left: MCEstimate, right: MCEstimate, confidence: float,
           force_inconclusive: bool = False) -> tuple[WelchResult, str, str | None]:
    """Welch test plus the verdict rule; returns (test, verdict, reason)."""
    test = welch(left, right, confidence)
    scale = max(abs(left.mean), abs(right.mean))
    se_l = left.se if left.n >= 2 else 0.0
    se_r = right.se if right.n >= 2 else 0.0
    if force_inconclusive:
        return test, "inconclusive", "heavy-tailed summands"
    if max(se_l, se_r) > SE_RATIO_LIMIT * scale:
        return test, "inconclusive", "standard error above 20% of the mean"
    return test, ("fail" if test.reject else "pass"), None


def _kurtosis_flag(sides: list[IdentitySide], seed: int) -> dict:
    out = {}
    for s, lane in zip(sides, _PILOT_LANES):
        vals, _ = s(PILOT_N, derive_rng_stream(seed, lane, 0))
        if np.all(vals == vals[0]):
            k = 0.0
        else:
            k = float(stats.kurtosis(vals, fisher=False))
        out[f"pilot_kurtosis_{s.side}"] = k
    return out


def paired_report(identity: str, functional: dict, left_fn, right_fn, *, h, x, n: int,
                  seed: int, workers: int, chunk: int, confidence: float, spec: dict,
                  diagnostics: dict | None = None, force_inconclusive: bool = False) -> IdentityReport:
    (left, dl), (right, dr) = run_many(
        [(left_fn, n, seed, LEFT_LANE), (right_fn, n, seed, RIGHT_LANE)], workers, chunk)
    test, verdict, reason = decide(left, right, confidence, force_inconclusive)
    diag = dict(diagnostics or {})
    diag.update({f"left_{k}": v for k, v in dl.items()})
    diag.update({f"right_{k}": v for k, v in dr.items()})
    diag["critical_value"] = test.critical
    diag["confidence"] = confidence
    if reason:
        diag["inconclusive_reason"] = reason
    return IdentityReport(identity, functional, list(h), x, n, left, right, test, verdict,
                          seed, diag, spec)


# ---------------------------------------------------------------------------
# identities

_REQUIRED_DEGREE = {"boll": "alpha", "boll22": 0.0, "do20": 0.0, "tyy": None}


def _check_degree(spec: IdentitySpec):
    F = builtin_functional(spec.functional, spec.cfg)
    want = _REQUIRED_DEGREE[spec.identity]
    if want == "alpha":
        want = spec.cfg.alpha
    if want is not None and (F.degree is None or not math.isclose(F.degree, want, abs_tol=1e-12)):
        raise ConfigurationError(
            f"identity {spec.identity} needs a functional of degree {want}, "
            f"got {F.degree} for {F.descriptor['kind']}"
        )
    return F


def verify(spec: IdentitySpec) -> IdentityReport:
    """Estimate both sides of ``spec.identity`` and return a report."""
    F = _check_degree(spec)
    diag = {}
    for name, src in (("left", spec.left_source), ("right", spec.right_source)):
        diag.update({f"{name}_{k}": v for k, v in source_diagnostics(src).items()})
    sides = [IdentitySide(spec.identity, side, src, F.descriptor, spec.cfg, spec.h, spec.x)
             for side, src in (("left", spec.left_source), ("right", spec.right_source))]
    heavy = False
    if spec.identity == "tyy" and not F.bounded:
        diag["unbounded_functional"] = True
        diag.update(_kurtosis_flag(sides, spec.seed))
        heavy = max(diag["pilot_kurtosis_left"], diag["pilot_kurtosis_right"]) > KURTOSIS_LIMIT
    return paired_report(spec.identity, F.descriptor, sides[0], sides[1], h=spec.h, x=spec.x,
                         n=spec.n, seed=spec.seed, workers=spec.workers, chunk=spec.chunk,
                         confidence=spec.confidence, spec=spec.to_dict(), diagnostics=diag,
                         force_inconclusive=heavy)


def _checked(spec: IdentitySpec, kind: str) -> IdentityReport:
    if spec.identity != kind:
        raise ConfigurationError(f"expected a {kind} spec, got {spec.identity}")
    return verify(spec)


def verify_boll(spec: IdentitySpec) -> IdentityReport:
    """``E F(Z) = E F(B^h Zhat)`` for ``F`` of degree alpha."""
    return _checked(spec, "boll")


def verify_boll22(spec: IdentitySpec) -> IdentityReport:
    """``E ||Z(h)||^a G(Z) = E ||Zhat(0)||^a G(B^h Zhat)`` for ``G`` of degree 0."""
    return _checked(spec, "boll22")


def verify_do20(spec: IdentitySpec) -> IdentityReport:
    """``E ||Theta(h)||^a G(Theta) = E 1{Theta(-h) != 0} G(B^h Theta)`` for degree-0 ``G``."""
    return _checked(spec, "do20")


def verify_tyy(spec: IdentitySpec) -> IdentityReport:
    """``E G(x B^h Y) 1{x||Y(-h)|| > 1} = x^a E G(Y) 1{||Y(h)|| > x}``."""
    return _checked(spec, "tyy")
