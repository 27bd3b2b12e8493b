"""Deterministic sharded execution.

Work is split into a fixed number of shards with seeds spawned from one
``SeedSequence``; results are reduced in shard order, so output never depends
on how many threads ran. ``RENYI_LAB_THREADS`` caps the pool size.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

DEFAULT_SHARDS = 8


def max_threads() -> int:
    raw = os.environ.get("RENYI_LAB_THREADS", "")
    try:
        value = int(raw)
    except ValueError:
        value = os.cpu_count() or 1
    return max(1, value)


def shard_sizes(total: int, shards: int = DEFAULT_SHARDS) -> list[int]:
    base, extra = divmod(int(total), shards)
    return [base + (i < extra) for i in range(shards)]


def map_shards(fn, total: int, seed, shards: int = DEFAULT_SHARDS):
    """Run ``fn(size, rng)`` on each shard and return the results in shard order."""
    seqs = np.random.SeedSequence(seed).spawn(shards)
    jobs = [(size, np.random.default_rng(s)) for size, s in zip(shard_sizes(total, shards), seqs)]
    workers = min(max_threads(), shards)
    if workers == 1:
        return [fn(size, rng) for size, rng in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))
