"""Point sets, path samples, norms and shifts.

Everything here is an immutable value: arrays are copied on construction
and marked read-only, so instances can be shared freely between workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, ConstructionError, ContractError


class NormKind(str, Enum):
    SUP = "sup"
    EUCLIDEAN = "euclidean"
    L1 = "l1"


@dataclass(frozen=True)
class FieldConfig:
    """Homogeneity index and dimensions shared by every sampler.

    ``dim_d`` is the dimension of field values, ``dim_l`` the dimension of
    the parameter space the field is indexed by.
    """

    alpha: float = 1.0
    dim_d: int = 1
    dim_l: int = 1
    norm_kind: NormKind = NormKind.EUCLIDEAN

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise ConfigurationError(f"alpha must be positive, got {self.alpha}")
        if int(self.dim_d) != self.dim_d or self.dim_d < 1:
            raise ConfigurationError(f"dim_d must be a positive integer, got {self.dim_d}")
        if int(self.dim_l) != self.dim_l or self.dim_l < 1:
            raise ConfigurationError(f"dim_l must be a positive integer, got {self.dim_l}")
        object.__setattr__(self, "norm_kind", NormKind(self.norm_kind))

    def with_dim_d(self, dim_d: int) -> "FieldConfig":
        return FieldConfig(self.alpha, dim_d, self.dim_l, self.norm_kind)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PointSet:
    """Ordered finite list of sites in R^l.

    Row ``i`` of :attr:`points` is site ``i``; samplers return values in
    the same order. Duplicates are allowed (see :meth:`duplicates`).
    """

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            # a flat list is read as n sites on the line
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2:
            raise ConstructionError(f"points must be a 2-d array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ConstructionError("site coordinates must be finite")
        object.__setattr__(self, "points", _frozen(pts))

    @classmethod
    def of(cls, points: Iterable, dim_l: int | None = None) -> "PointSet":
        pts = np.asarray(list(points) if not isinstance(points, np.ndarray) else points, dtype=float)
        if pts.size == 0:
            return cls.empty(dim_l or 1)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1) if (dim_l in (None, 1)) else pts.reshape(1, -1)
        return cls(pts)

    @classmethod
    def empty(cls, dim_l: int = 1) -> "PointSet":
        return cls(np.zeros((0, dim_l)))

    @classmethod
    def origin(cls, dim_l: int = 1) -> "PointSet":
        return cls(np.zeros((1, dim_l)))

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim_l(self) -> int:
        return self.points.shape[1]

    def __eq__(self, other) -> bool:
        return isinstance(other, PointSet) and np.array_equal(self.points, other.points)

    def __hash__(self) -> int:
        return hash((self.points.shape, self.points.tobytes()))

    def keys(self) -> list[tuple[float, ...]]:
        return [tuple(row) for row in self.points.tolist()]

    def index_of(self, point: Sequence[float]) -> int:
        """Index of the first site exactly equal to ``point``."""
        p = np.asarray(point, dtype=float).reshape(-1)
        hits = np.flatnonzero(np.all(self.points == p, axis=1))
        if hits.size == 0:
            raise ContractError(f"site {tuple(p)} not in point set")
        return int(hits[0])

    def duplicates(self) -> list[int]:
        """Indices of sites that repeat an earlier site exactly."""
        seen = set()
        dups = []
        for i, k in enumerate(self.keys()):
            if k in seen:
                dups.append(i)
            seen.add(k)
        return dups

    def dedup(self) -> tuple["PointSet", np.ndarray]:
        """Unique sites in first-seen order, plus the map from old rows to new rows."""
        order: dict[tuple, int] = {}
        inverse = np.empty(len(self), dtype=np.int64)
        for i, k in enumerate(self.keys()):
            inverse[i] = order.setdefault(k, len(order))
        uniq = np.empty((len(order), self.dim_l))
        for k, j in order.items():
            uniq[j] = k
        return PointSet(uniq), inverse

    def to_list(self) -> list[list[float]]:
        return self.points.tolist()


@dataclass(frozen=True, eq=False)
class PathSample:
    """One realization of a field restricted to a finite point set."""

    sites: PointSet
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals.reshape(-1, 1)
        if vals.ndim != 2 or vals.shape[0] != len(self.sites):
            raise ConstructionError(
                f"values shape {vals.shape} does not match {len(self.sites)} sites"
            )
        if not np.all(np.isfinite(vals)):
            raise ConstructionError("path values must be finite")
        object.__setattr__(self, "values", _frozen(vals))

    @property
    def dim_d(self) -> int:
        return self.values.shape[1]

    def at(self, point: Sequence[float]) -> np.ndarray:
        return self.values[self.sites.index_of(point)]

    def scaled(self, c: float) -> "PathSample":
        return PathSample(self.sites, c * self.values)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PathSample)
            and self.sites == other.sites
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Window:
    """The cube ``center + [-m, m]^l``; ``center`` defaults to the origin."""

    half_width: float
    dim_l: int = 1
    center: tuple[float, ...] | None = None

    def __post_init__(self):
        if not (np.isfinite(self.half_width) and self.half_width > 0):
            raise ConfigurationError(f"window half-width must be positive, got {self.half_width}")
        if self.center is not None:
            c = tuple(float(x) for x in self.center)
            if len(c) != self.dim_l:
                raise ConfigurationError("window center has the wrong dimension")
            object.__setattr__(self, "center", c)

    @property
    def volume(self) -> float:
        return float((2.0 * self.half_width) ** self.dim_l)

    @property
    def center_array(self) -> np.ndarray:
        if self.center is None:
            return np.zeros(self.dim_l)
        return np.asarray(self.center, dtype=float)

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim_l)
        return np.all(np.abs(pts - self.center_array) <= self.half_width, axis=1)

    def shifted(self, h: Sequence[float]) -> "Window":
        return Window(self.half_width, self.dim_l, tuple(self.center_array + np.asarray(h, float)))

    def doubled(self) -> "Window":
        return Window(2.0 * self.half_width, self.dim_l, self.center)


@dataclass(frozen=True)
class Sample:
    """A batch of ``n`` joint realizations at one point set.

    ``values`` has shape ``(n, m, d)``. ``weights`` is ``None`` for plain
    draws and holds the tilting weights for weighted local-field draws;
    expectations are then means of ``weights * summand``.
    """

    sites: PointSet
    values: np.ndarray
    weights: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def path(self, i: int) -> PathSample:
        return PathSample(self.sites, self.values[i])

    def weights_or_ones(self) -> np.ndarray:
        return np.ones(self.n) if self.weights is None else self.weights


def norm_value(v, cfg: FieldConfig | NormKind | str) -> np.ndarray | float:
    """Vector norm over the last axis.

    >>> norm_value([3.0, -4.0], "euclidean")
    5.0
    """
    kind = cfg.norm_kind if isinstance(cfg, FieldConfig) else NormKind(cfg)
    a = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ConstructionError("norm of a non-finite vector")
    if a.ndim == 0:
        a = a.reshape(1)
    if kind is NormKind.SUP:
        out = np.max(np.abs(a), axis=-1) if a.shape[-1] else np.zeros(a.shape[:-1])
    elif kind is NormKind.EUCLIDEAN:
        if a.shape[-1] == 1:
            out = np.abs(a[..., 0])
        else:
            # scale by the largest entry so tiny or huge vectors neither underflow nor overflow
            big = np.max(np.abs(a), axis=-1) if a.shape[-1] else np.zeros(a.shape[:-1])
            safe = np.where(big > 0, big, 1.0)
            r = a / safe[..., None]
            out = big * np.sqrt(np.sum(r * r, axis=-1))
    else:
        out = np.sum(np.abs(a), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def shift_points(pts: PointSet, h) -> PointSet:
    """Sites ``t_i - h``: evaluating Z there gives ``B^h Z`` at ``pts``."""
    h = np.asarray(h, dtype=float).reshape(-1)
    if h.size != pts.dim_l:
        raise ContractError(f"shift of dimension {h.size} for {pts.dim_l}-d sites")
    return PointSet(pts.points - h)


def union_sites(a: PointSet, b: PointSet) -> tuple[PointSet, np.ndarray, np.ndarray]:
    """Deduplicated union keeping ``a``'s order, then ``b``'s new sites.

    Returns ``(union, ia, ib)`` with ``union.points[ia] == a.points`` and
    ``union.points[ib] == b.points``. Equality is exact (no tolerance).
    """
    if len(a) and len(b) and a.dim_l != b.dim_l:
        raise ContractError("cannot merge point sets of different dimension")
    dim_l = a.dim_l if len(a) else b.dim_l
    index: dict[tuple, int] = {}
    rows: list[tuple] = []

    def put(k):
        j = index.get(k)
        if j is None:
            j = index[k] = len(rows)
            rows.append(k)
        return j

    ia = np.array([put(k) for k in a.keys()], dtype=np.int64)
    ib = np.array([put(k) for k in b.keys()], dtype=np.int64)
    pts = np.array(rows, dtype=float).reshape(len(rows), dim_l)
    return PointSet(pts), ia, ib


def union_many(*sets: PointSet) -> tuple[PointSet, list[np.ndarray]]:
    """Union of several point sets; one index map per input."""
    acc = sets[0]
    maps = [np.arange(len(acc))]
    for s in sets[1:]:
        acc, ia, ib = union_sites(acc, s)
        maps = [ia[m] for m in maps] + [ib]
    return acc, maps
