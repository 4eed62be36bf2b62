"""Chunked, seeded Monte Carlo with an order-fixed merge.

The draw budget is cut into fixed-size chunks, and chunk i always uses the
i-th child of ``SeedSequence(seed)``.  Results are concatenated in chunk
order, so the output does not depend on how many workers ran the chunks.
"""

from __future__ import annotations

import math
import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import ParameterError
from .stats import Moments

CHUNK = 20_000

# the task is handed to forked workers through this global, so closures
# and lambdas never need to be pickled
_TASK: Callable | None = None


def _run_chunk(args):
    seed_seq, size = args
    return _TASK(np.random.default_rng(seed_seq), size)


def chunk_plan(n: int, seed: int, chunk: int = CHUNK) -> list[tuple[np.random.SeedSequence, int]]:
    if n < 1:
        raise ParameterError("number of draws must be positive")
    if chunk < 1:
        raise ParameterError("chunk size must be positive")
    k = math.ceil(n / chunk)
    children = np.random.SeedSequence(seed).spawn(k)
    sizes = [chunk] * (k - 1) + [n - chunk * (k - 1)]
    return list(zip(children, sizes))


def default_workers() -> int:
    return max(1, min(8, os.cpu_count() or 1))


@dataclass
class McRun:
    draws: np.ndarray
    seed: int
    chunks: int
    workers: int

    def moments(self, column=None) -> Moments:
        x = self.draws if column is None else self.draws[:, column]
        # chunk-wise accumulation merged left to right, as a worker pool would
        acc = Moments()
        for part in np.array_split(np.asarray(x, dtype=float), self.chunks):
            acc = acc.merge(Moments.of(part))
        return acc


def run_mc(task: Callable[[np.random.Generator, int], np.ndarray], n: int, seed: int,
           workers: int = 1, chunk: int = CHUNK) -> McRun:
    """Evaluate ``task(rng, size)`` chunk by chunk; rows are stacked in chunk order."""
    global _TASK
    plan = chunk_plan(n, seed, chunk)
    workers = max(1, int(workers))
    can_fork = "fork" in multiprocessing.get_all_start_methods()
    if workers == 1 or len(plan) == 1 or not can_fork:
        parts = [task(np.random.default_rng(ss), size) for ss, size in plan]
        used = 1
    else:
        _TASK = task
        try:
            ctx = multiprocessing.get_context("fork")
            with ProcessPoolExecutor(max_workers=min(workers, len(plan)), mp_context=ctx) as pool:
                parts = list(pool.map(_run_chunk, plan))
        finally:
            _TASK = None
        used = min(workers, len(plan))
    return McRun(np.concatenate([np.asarray(p) for p in parts], axis=0), seed, len(plan), used)
