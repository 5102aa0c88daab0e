"""Seeded per-worker random streams and an order-preserving worker map."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np


def worker_streams(seed, workers: int) -> list[np.random.Generator]:
    if workers < 1:
        raise ValueError("workers must be positive")
    children = np.random.SeedSequence(seed).spawn(workers)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


def split_count(total: int, workers: int) -> list[int]:
    base, extra = divmod(int(total), workers)
    return [base + (i < extra) for i in range(workers)]


def run_workers(fn, jobs, workers: int):
    """Apply ``fn`` to each job; results come back in job order."""
    if workers == 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))
