"""Reproducible random streams and fixed-order parallel estimation.

Work of size ``n`` is cut into chunks of a fixed size. Chunk ``c`` of lane
``k`` always draws from ``derive_rng_stream(seed, k, c)``, whatever the
number of OS workers, and chunk estimates are merged in chunk order. A
report therefore depends on (seed, chunk size) only.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from typing import Callable

import numpy as np

from .estimate import MCEstimate

DEFAULT_CHUNK = 10_000


def derive_rng_stream(master_seed: int, worker_index: int, replicate_index: int) -> np.random.Generator:
    """Counter-based (Philox) generator keyed by the triple.

    ``worker_index`` names a logical stream lane (left/right side, task id)
    rather than an OS process, which keeps results independent of the
    worker count.
    """
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(worker_index), int(replicate_index)))
    return np.random.Generator(np.random.Philox(ss))


def chunk_sizes(n: int, chunk: int = DEFAULT_CHUNK) -> list[int]:
    if n <= 0:
        return []
    k = math.ceil(n / chunk)
    return [chunk] * (k - 1) + [n - chunk * (k - 1)]


def _run_one(task):
    fn, size, seed, lane, idx = task
    out = fn(size, derive_rng_stream(seed, lane, idx))
    if isinstance(out, tuple):
        summands, diag = out
    else:
        summands, diag = out, {}
    return MCEstimate.from_samples(summands), diag


def merge_diagnostics(parts: list[dict]) -> dict:
    """Combine per-chunk diagnostics: maxima for ``max_*`` keys, sums for counts."""
    out: dict = {}
    for d in parts:
        for k, v in d.items():
            if k not in out:
                out[k] = v
            elif k.startswith("max_"):
                out[k] = max(out[k], v)
            elif k.startswith("min_"):
                out[k] = min(out[k], v)
            elif isinstance(v, (int, float)) and not isinstance(v, bool):
                out[k] = out[k] + v
            elif isinstance(v, bool):
                out[k] = out[k] or v
    return out


def run_many(jobs: list[tuple], workers: int = 1, chunk: int = DEFAULT_CHUNK) -> list[tuple[MCEstimate, dict]]:
    """Run several ``(fn, n, seed, lane)`` estimation jobs on one worker pool.

    Each job's chunks are merged in chunk order, so the output does not
    depend on ``workers``.
    """
    tasks, owner = [], []
    for j, (fn, n, seed, lane) in enumerate(jobs):
        for i, size in enumerate(chunk_sizes(n, chunk)):
            tasks.append((fn, size, seed, lane, i))
            owner.append(j)
    if workers <= 1 or len(tasks) <= 1:
        results = [_run_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as ex:
            results = list(ex.map(_run_one, tasks))
    out = []
    for j in range(len(jobs)):
        mine = [r for r, o in zip(results, owner) if o == j]
        out.append((MCEstimate.merge_all(r[0] for r in mine),
                    merge_diagnostics([r[1] for r in mine])))
    return out


def run_chunks(fn: Callable, n: int, seed: int, lane: int = 0, workers: int = 1,
               chunk: int = DEFAULT_CHUNK) -> tuple[MCEstimate, dict]:
    """Estimate the mean of ``fn``'s summands over ``n`` draws.

    ``fn(size, rng)`` returns an array of ``size`` summands, optionally
    paired with a diagnostics dict. ``fn`` must be picklable when
    ``workers > 1``.
    """
    return run_many([(fn, n, seed, lane)], workers, chunk)[0]
