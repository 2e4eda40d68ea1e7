"""Per-path random streams and an order-independent parallel map."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np


def derive_stream(master_seed: int, path_index: int) -> np.random.SeedSequence:
    """Seed material of path ``path_index`` under ``master_seed``.

    This is ``SeedSequence(master_seed).spawn(...)[path_index]`` computed
    directly: the spawn key ``(path_index,)`` makes streams of different
    indices independent by construction of the SeedSequence hash.
    """
    if master_seed < 0 or path_index < 0:
        raise ValueError("seeds and path indices must be nonnegative")
    return np.random.SeedSequence(int(master_seed), spawn_key=(int(path_index),))


def default_jobs() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def run_indexed(fn: Callable[[int], object], n: int, jobs: int | None = None) -> list:
    """[fn(0), ..., fn(n-1)] evaluated on ``jobs`` threads; result order is by index.

    The compiled kernels release the GIL, so threads give real parallelism
    and the output never depends on the worker count or completion order.
    """
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    if jobs == 1 or n <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, range(n), chunksize=max(1, n // (8 * jobs))))
