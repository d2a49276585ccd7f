"""Command line entry point.

    shiftgen <command> --config FILE [--set key=value ...] [--out DIR]

Commands: simulate-maxstable, exponent, transform, verify, integrate,
validate. Every artifact embeds the resolved config, and
``config.resolved.json`` in the output directory reruns the experiment.

Exit codes: 0 success (including inconclusive verdicts, which are flagged
in the report), 1 a failed verdict, 2 a configuration error, 3 a numerical
failure during the run.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import config as C
from .core import Window
from .errors import ConfigurationError, ShiftgenError
from .maxstable import ExponentQuery, ExponentSummand, dehaan_batch, fidi_cdf
from .representors import validate_representor
from .rng import derive_rng_stream, run_chunks
from .transforms import ShiftTransform
from .verify import IdentitySpec, verify

COMMANDS = ("simulate-maxstable", "exponent", "transform", "verify", "integrate", "validate")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def jsonable(obj):
    """Plain JSON types; non-finite floats become the strings inf, -inf, nan."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    return obj


def write_json(path: Path, payload: dict):
    path.write_text(json.dumps(jsonable(payload), indent=2, sort_keys=True) + "\n")


def _comment_header(fh, cfg: C.ExperimentConfig):
    for line in C.dump_config(cfg).splitlines():
        fh.write(f"# {line}\n")


def write_paths_csv(path: Path, cfg: C.ExperimentConfig, sample, extra_name: str, extra):
    """Long format: one row per (replicate, site)."""
    l, d = sample.sites.dim_l, sample.values.shape[2]
    with path.open("w", newline="") as fh:
        _comment_header(fh, cfg)
        w = csv.writer(fh)
        w.writerow(["replicate"] + [f"t_{i + 1}" for i in range(l)]
                   + [f"x_{j + 1}" for j in range(d)] + [extra_name])
        for r in range(sample.n):
            for i, t in enumerate(sample.sites.points):
                w.writerow([r] + [repr(float(c)) for c in t]
                           + [repr(float(v)) for v in sample.values[r, i]] + [repr(float(extra[r]))])


def read_paths_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    """Header and rows of a path CSV, skipping comment lines."""
    with Path(path).open() as fh:
        rows = list(csv.reader(line for line in fh if not line.startswith("#")))
    return rows[0], rows[1:]


# ---------------------------------------------------------------------------
# commands


def _section(cfg: C.ExperimentConfig, name: str):
    sec = getattr(cfg, "validate_" if name == "validate" else name)
    if sec is None:
        raise ConfigurationError(f"the config has no '{name}' section")
    return sec


def _base_payload(cfg: C.ExperimentConfig) -> dict:
    return {"seed": cfg.mc.master_seed, "config": cfg.resolved()}


def cmd_simulate(cfg: C.ExperimentConfig, out: Path) -> int:
    sec = _section(cfg, "simulate")
    rep = C.build_source(sec.source, cfg)
    pts = C.sites(sec.sites, cfg.field.dim_l)
    rng = derive_rng_stream(cfg.mc.master_seed, 0, 0)
    s = dehaan_batch(pts, rep, C.dehaan_config(sec.dehaan), sec.n_paths, rng)
    diag = s.diagnostics
    write_paths_csv(out / "paths.csv", cfg, s, "truncation_diag", diag["truncation_diag"])
    summary = {k: v for k, v in diag.items() if k not in ("truncation_diag", "terms")}
    summary["mean_terms"] = float(np.mean(diag["terms"]))
    summary["n_paths"] = sec.n_paths
    write_json(out / "diagnostics.json", {**_base_payload(cfg), "diagnostics": summary})
    return EXIT_OK


def cmd_exponent(cfg: C.ExperimentConfig, out: Path) -> int:
    sec = _section(cfg, "exponent")
    rep = C.build_source(sec.source, cfg)
    q = ExponentQuery(C.sites(sec.sites, cfg.field.dim_l), tuple(sec.x))
    mc = cfg.mc
    est, diag = run_chunks(ExponentSummand(rep, q), mc.n, mc.master_seed, 0, mc.workers, mc.chunk)
    write_json(out / "exponent.json", {
        **_base_payload(cfg), "query": q.to_dict(), "mean": est.mean, "se": est.se, "n": est.n,
        "fidi_cdf": fidi_cdf(est), "diagnostics": diag,
    })
    return EXIT_OK


def cmd_transform(cfg: C.ExperimentConfig, out: Path) -> int:
    sec = _section(cfg, "transform")
    base = C.build_source(sec.base, cfg)
    t = ShiftTransform(base, C.shift_density(cfg.shift_density),
                       C.quadrature_rule(cfg.window, cfg.field.dim_l), sec.variant)
    tail = t.check_truncation()
    pts = C.sites(sec.sites, cfg.field.dim_l)
    s = t.sample(pts, sec.n_paths, derive_rng_stream(cfg.mc.master_seed, 0, 0))
    write_paths_csv(out / "transformed_paths.csv", cfg, s, "weight", s.weights_or_ones())
    report = validate_representor(t, sec.validate_n, derive_rng_stream(cfg.mc.master_seed, 1, 0))
    write_json(out / "validation.json", {**_base_payload(cfg), **report.to_dict(),
                                         "diagnostics": {**tail, **s.diagnostics}})
    return EXIT_OK if report.passed else EXIT_FAIL


def build_identity_spec(cfg: C.ExperimentConfig) -> IdentitySpec:
    sec = _section(cfg, "verify")
    mc = cfg.mc
    return IdentitySpec(
        identity=sec.identity, functional=sec.functional,
        left_source=C.build_source(sec.left, cfg), right_source=C.build_source(sec.right, cfg),
        cfg=C.field_config(cfg), h=sec.h if isinstance(sec.h, list) else [sec.h], x=sec.x,
        n=mc.n, confidence=mc.confidence, seed=mc.master_seed, workers=mc.workers,
        chunk=mc.chunk, lattice_step=cfg.window.step if sec.lattice_check else None)


def cmd_verify(cfg: C.ExperimentConfig, out: Path) -> int:
    report = verify(build_identity_spec(cfg))
    payload = report.to_dict()
    payload["config"] = cfg.resolved()
    payload["flagged"] = report.verdict == "inconclusive"
    write_json(out / "report.json", payload)
    return EXIT_FAIL if report.verdict == "fail" else EXIT_OK


@dataclass(frozen=True)
class Integrand:
    """Built-in integrands for the uniform-sampling estimator."""

    kind: str
    sigma: float = 1.0
    mean: float = 0.0
    low: float = 0.0
    high: float = 1.0
    value: float = 1.0

    def __call__(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == "gaussian_pdf":
            z = (t - self.mean) / self.sigma
            return np.prod(np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2 * math.pi)), axis=-1)
        if self.kind == "indicator":
            return np.all((t >= self.low) & (t <= self.high), axis=-1).astype(float)
        return np.full(t.shape[0], self.value)


@dataclass(frozen=True)
class IntegralSummand:
    """``vol(W) * w(U)`` for ``U`` uniform on the window."""

    integrand: Integrand
    window: Window

    def __call__(self, size: int, rng: np.random.Generator) -> np.ndarray:
        w = self.window
        t = w.center_array + w.half_width * (2.0 * rng.random((size, w.dim_l)) - 1.0)
        return w.volume * self.integrand(t)


def cmd_integrate(cfg: C.ExperimentConfig, out: Path) -> int:
    sec = _section(cfg, "integrate")
    ig = sec.integrand
    f = Integrand(ig.kind, ig.sigma, ig.mean, ig.low, ig.high, ig.value)
    l = cfg.field.dim_l
    center = tuple(sec.window.center) if sec.window.center is not None else None
    window = Window(sec.window.half_width, l, center)
    mc = cfg.mc
    est, _ = run_chunks(IntegralSummand(f, window), mc.n, mc.master_seed, 0, mc.workers, mc.chunk)
    write_json(out / "integrate.json", {**_base_payload(cfg), "mean": est.mean, "se": est.se,
                                        "n": est.n, "volume": window.volume})
    return EXIT_OK


def cmd_validate(cfg: C.ExperimentConfig, out: Path) -> int:
    sec = _section(cfg, "validate")
    rep = C.build_source(sec.source, cfg)
    report = validate_representor(rep, sec.n, derive_rng_stream(cfg.mc.master_seed, 0, 0))
    write_json(out / "validation.json", {**_base_payload(cfg), **report.to_dict()})
    return EXIT_OK if report.passed else EXIT_FAIL


_HANDLERS = {
    "simulate-maxstable": cmd_simulate,
    "exponent": cmd_exponent,
    "transform": cmd_transform,
    "verify": cmd_verify,
    "integrate": cmd_integrate,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shiftgen", description=__doc__.split("\n\n")[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", "-c", required=True, help="YAML or JSON experiment config")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key (dotted path); repeatable")
    p.add_argument("--out", "-o", default=".", help="output directory (default: current)")
    p.add_argument("--seed", type=int, help="shorthand for --set mc.master_seed=SEED")
    p.add_argument("--workers", type=int, help="shorthand for --set mc.workers=N")
    return p


def run_command(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"mc.master_seed={args.seed}")
    if args.workers is not None:
        overrides.append(f"mc.workers={args.workers}")
    out = Path(args.out)
    try:
        cfg = C.load_config_file(args.config, overrides)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.resolved.json").write_text(C.dump_config(cfg) + "\n")
        return _HANDLERS[args.command](cfg, out)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ShiftgenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(run_command())
