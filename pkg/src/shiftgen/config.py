"""Experiment configuration: YAML schema, line-aware errors and object builders.

A config file is YAML (JSON is accepted too). Unknown keys are errors;
every default is materialized when the config is echoed into artifacts.
Sources are written inline or as names of entries in the ``sources``
section.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Any, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError

from .core import FieldConfig, PointSet, Window
from .errors import ConfigurationError
from .functionals import QuadratureRule, ShiftDensity
from .gaussian import GaussianSampler, VariogramModel
from .maxstable import DeHaanConfig
from .representors import (BrownResnick, ClusterProfile, ConstantRepresentor, Profile,
                           ScaledRepresentor, SignedSplitRepresentor)
from .transforms import ShiftTransform, TailSampler, TiltedSampler


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


PosFloat = Annotated[float, Field(gt=0)]
PosInt = Annotated[int, Field(ge=1)]
Sites = list[Union[float, list[float]]]


class FieldSection(_Strict):
    alpha: PosFloat = 1.0
    dim_d: PosInt = 1
    dim_l: PosInt = 1
    norm_kind: Literal["sup", "euclidean", "l1"] = "euclidean"


class VariogramSection(_Strict):
    kind: Literal["fractional"] = "fractional"
    theta: PosFloat = 1.0
    hurst: Annotated[float, Field(gt=0, le=1)] = 0.5


class GaussianSection(_Strict):
    jitter: Annotated[float, Field(ge=0)] = 1e-10


class WindowSection(_Strict):
    half_width: PosFloat = 48.125
    step: PosFloat = 0.25


class DensitySection(_Strict):
    kind: Literal["gaussian", "student_t", "uniform_window"] = "student_t"
    sigma: PosFloat = 8.0
    scale: PosFloat = 4.0
    df: PosFloat = 3.0
    half_width: PosFloat = 1.0
    allow_nonpositive: bool = False


class MCSection(_Strict):
    n: Annotated[int, Field(ge=2)] = 100_000
    master_seed: Annotated[int, Field(ge=0)] = 0
    workers: PosInt = 1
    chunk: PosInt = 10_000
    confidence: Annotated[float, Field(gt=0, lt=1)] = 0.99


class ProfileSection(_Strict):
    kind: Literal["gaussian_pdf", "triangle", "indicator_box"] = "gaussian_pdf"
    sigma: PosFloat = 1.0
    width: PosFloat = 1.0


# -- sources -----------------------------------------------------------------


class BrownResnickSource(_Strict):
    kind: Literal["brown_resnick"]
    variogram: Optional[VariogramSection] = None
    jitter: Optional[Annotated[float, Field(ge=0)]] = None


class ClusterSource(_Strict):
    kind: Literal["cluster"]
    profile: ProfileSection = ProfileSection()
    scale: PosFloat = 1.0
    enforce_normalization: bool = True


class ConstantSource(_Strict):
    kind: Literal["constant"]
    value: PosFloat = 1.0


class ScaledSource(_Strict):
    kind: Literal["scaled"]
    base: "SourceRef"
    factor: PosFloat = 1.0


class SignedSplitSource(_Strict):
    kind: Literal["signed_split"]
    base: "SourceRef"


class ThetaSource(_Strict):
    kind: Literal["theta"]
    base: "SourceRef"
    mode: Literal["exact", "sir", "weighted"] = "weighted"
    pool_size: PosInt = 64


class TailSource(_Strict):
    kind: Literal["tail"]
    base: "SourceRef"
    mode: Literal["exact", "sir", "weighted"] = "weighted"
    pool_size: PosInt = 64


class TransformSource(_Strict):
    kind: Literal["transform"]
    base: "SourceRef"
    variant: Literal["zn", "zn_prime_finiteS", "zn_boll3", "zn_prime_boll3b", "zn_second", "cluster"]
    shift_density: Optional[DensitySection] = None
    window: Optional[WindowSection] = None
    check_tail: bool = True
    pilot_n: PosInt = 1000


SourceSpec = Annotated[
    Union[BrownResnickSource, ClusterSource, ConstantSource, ScaledSource, SignedSplitSource,
          ThetaSource, TailSource, TransformSource],
    Field(discriminator="kind"),
]
SourceRef = Union[str, SourceSpec]

for _m in (ScaledSource, SignedSplitSource, ThetaSource, TailSource, TransformSource):
    _m.model_rebuild()


# -- command sections ----------------------------------------------------------


def _default_br():
    return BrownResnickSource(kind="brown_resnick")


class DeHaanSection(_Strict):
    max_terms: PosInt = 500
    stop_quantile: Annotated[float, Field(gt=0, lt=1)] = 0.9999
    sup_bound_estimate: Optional[PosFloat] = None
    pilot_n: PosInt = 20_000


class SimulateSection(_Strict):
    source: SourceRef = Field(default_factory=_default_br)
    sites: Sites = [0.0, 1.0]
    n_paths: PosInt = 100
    dehaan: DeHaanSection = DeHaanSection()


class ExponentSection(_Strict):
    source: SourceRef = Field(default_factory=_default_br)
    sites: Sites = [0.0, 1.0]
    x: list[PosFloat] = [1.0, 1.0]


class TransformSection(_Strict):
    base: SourceRef = Field(default_factory=_default_br)
    variant: Literal["zn", "zn_prime_finiteS", "zn_boll3", "zn_prime_boll3b", "zn_second",
                     "cluster"] = "zn"
    sites: Sites = [0.0, 1.0]
    n_paths: PosInt = 100
    validate_n: Annotated[int, Field(ge=1000)] = 100_000


class VerifySection(_Strict):
    identity: Literal["boll", "boll22", "do20", "tyy"]
    functional: dict[str, Any] = {"kind": "constant", "value": 1.0}
    h: Union[float, list[float]] = 0.0
    x: Optional[PosFloat] = None
    left: SourceRef = Field(default_factory=_default_br)
    right: SourceRef = Field(default_factory=_default_br)
    lattice_check: bool = True


class IntegrandSection(_Strict):
    kind: Literal["gaussian_pdf", "indicator", "constant"] = "gaussian_pdf"
    sigma: PosFloat = 1.0
    mean: float = 0.0
    low: float = 0.0
    high: float = 1.0
    value: Annotated[float, Field(ge=0)] = 1.0


class IntegrateWindow(_Strict):
    half_width: PosFloat = 4.0
    center: Optional[list[float]] = None


class IntegrateSection(_Strict):
    integrand: IntegrandSection = IntegrandSection()
    window: IntegrateWindow = IntegrateWindow()


class ValidateSection(_Strict):
    source: SourceRef = Field(default_factory=_default_br)
    n: Annotated[int, Field(ge=1000)] = 100_000


class ExperimentConfig(_Strict):
    field: FieldSection = FieldSection()
    variogram: VariogramSection = VariogramSection()
    gaussian: GaussianSection = GaussianSection()
    window: WindowSection = WindowSection()
    shift_density: DensitySection = DensitySection()
    mc: MCSection = MCSection()
    sources: dict[str, SourceSpec] = {}
    simulate: Optional[SimulateSection] = None
    exponent: Optional[ExponentSection] = None
    transform: Optional[TransformSection] = None
    verify: Optional[VerifySection] = None
    integrate: Optional[IntegrateSection] = None
    validate_: Optional[ValidateSection] = Field(default=None, alias="validate")
    overrides: list[str] = []

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    def resolved(self) -> dict:
        """Plain-JSON view with all defaults filled in."""
        return self.model_dump(mode="json", by_alias=True)


# ---------------------------------------------------------------------------
# loading


def _node_at(node, path):
    """Follow a pydantic error location through a composed YAML node tree."""
    for key in path:
        if isinstance(node, yaml.MappingNode):
            nxt = None
            for k, v in node.value:
                if k.value == str(key):
                    nxt = v
                    break
            if nxt is None:
                # discriminator tags and missing keys: stay on the parent
                continue
            node = nxt
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
    return node


def _format_errors(err: ValidationError, root) -> str:
    errors = err.errors()
    clean = []
    for e in errors:
        loc = tuple(p for p in e["loc"] if not (isinstance(p, str) and p.startswith("tagged-union[")))
        clean.append((loc, e))
    lines = []
    for loc, e in clean:
        # a source given as a mapping also fails the "name" branch of the union; drop that noise
        if loc and loc[-1] == "str" and any(l[:len(loc) - 1] == loc[:-1] and l != loc for l, _ in clean):
            continue
        key = ".".join(str(p) for p in loc) or "<root>"
        where = ""
        if root is not None:
            node = _node_at(root, loc)
            if node is not None:
                where = f"line {node.start_mark.line + 1}: "
        lines.append(f"{where}{key}: {e['msg']}")
    return "\n".join(lines)


def _set_path(data: dict, dotted: str, value):
    parts = dotted.split(".")
    cur = data
    for p in parts[:-1]:
        if not isinstance(cur.get(p), dict):
            cur[p] = {}
        cur = cur[p]
    cur[parts[-1]] = value


def parse_override(item: str) -> tuple[str, Any]:
    if "=" not in item:
        raise ConfigurationError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigurationError(f"override {item!r} has an empty key")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"override {item!r}: {exc}") from None
    return key, value


def load_config(text: str, overrides: list[str] | None = None, source: str = "<config>") -> ExperimentConfig:
    """Parse and validate a config document, applying ``key=value`` overrides."""
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{source}: invalid YAML: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"{source}: top level must be a mapping")
    overrides = list(overrides or [])
    for item in overrides:
        key, value = parse_override(item)
        _set_path(data, key, value)
    if overrides:
        data["overrides"] = list(data.get("overrides") or []) + overrides
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigurationError(f"{source}:\n{_format_errors(exc, root)}") from None


def load_config_file(path: str | Path, overrides: list[str] | None = None) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {p}: {exc.strerror}") from None
    return load_config(text, overrides, str(p))


def dump_config(cfg: ExperimentConfig) -> str:
    return json.dumps(cfg.resolved(), indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# builders


def field_config(cfg: ExperimentConfig) -> FieldConfig:
    f = cfg.field
    return FieldConfig(f.alpha, f.dim_d, f.dim_l, f.norm_kind)


def variogram(v: VariogramSection) -> VariogramModel:
    return VariogramModel(v.theta, v.hurst, v.kind)


def shift_density(d: DensitySection) -> ShiftDensity:
    if d.kind == "gaussian":
        return ShiftDensity("gaussian", sigma=d.sigma)
    if d.kind == "student_t":
        return ShiftDensity("student_t", sigma=d.scale, df=d.df)
    return ShiftDensity("uniform_window", half_width=d.half_width,
                        allow_nonpositive=d.allow_nonpositive)


def quadrature_rule(w: WindowSection, dim_l: int) -> QuadratureRule:
    return QuadratureRule(Window(w.half_width, dim_l), w.step)


def sites(raw, dim_l: int) -> PointSet:
    pts = [[float(p)] if not isinstance(p, list) else [float(c) for c in p] for p in raw]
    if any(len(p) != dim_l for p in pts):
        raise ConfigurationError(f"sites {raw!r} do not match parameter dimension {dim_l}")
    return PointSet.of(pts, dim_l)


def dehaan_config(d: DeHaanSection) -> DeHaanConfig:
    return DeHaanConfig(d.max_terms, d.stop_quantile, d.sup_bound_estimate, d.pilot_n)


def build_source(ref, cfg: ExperimentConfig, _stack: tuple = ()):
    """Instantiate a sampler from an inline spec or a name in ``sources``."""
    if isinstance(ref, str):
        if ref in _stack:
            raise ConfigurationError(f"source {ref!r} refers to itself (cycle {' -> '.join(_stack + (ref,))})")
        if ref not in cfg.sources:
            raise ConfigurationError(f"unknown source name {ref!r}")
        return build_source(cfg.sources[ref], cfg, _stack + (ref,))
    if isinstance(ref, dict):
        try:
            ref = TypeAdapter(SourceSpec).validate_python(ref)
        except ValidationError as exc:
            raise ConfigurationError(f"invalid inline source: {exc}") from None
    fc = field_config(cfg)
    kind = ref.kind
    if kind == "brown_resnick":
        vg = variogram(ref.variogram or cfg.variogram)
        jitter = cfg.gaussian.jitter if ref.jitter is None else ref.jitter
        return BrownResnick(fc, GaussianSampler(vg, jitter))
    if kind == "cluster":
        p = ref.profile
        return ClusterProfile(fc, Profile(p.kind, p.sigma, p.width), ref.scale,
                              ref.enforce_normalization)
    if kind == "constant":
        return ConstantRepresentor(fc, ref.value)
    base = build_source(ref.base, cfg, _stack)
    if kind == "scaled":
        return ScaledRepresentor(base, ref.factor)
    if kind == "signed_split":
        return SignedSplitRepresentor(base)
    if kind == "theta":
        return base if isinstance(base, TiltedSampler) else TiltedSampler(base, ref.mode, ref.pool_size)
    if kind == "tail":
        theta = base if isinstance(base, TiltedSampler) else TiltedSampler(base, ref.mode, ref.pool_size)
        return TailSampler(theta)
    if kind == "transform":
        dens = shift_density(ref.shift_density or cfg.shift_density)
        rule = quadrature_rule(ref.window or cfg.window, fc.dim_l)
        return ShiftTransform(base, dens, rule, ref.variant, pilot_n=ref.pilot_n,
                              check_tail=ref.check_tail)
    raise ConfigurationError(f"unknown source kind {kind!r}")
