"""Seeded random streams.

Every stream is a PCG64 generator seeded by ``SeedSequence(seed,
spawn_key=key)``.  Work is split into fixed-size chunks and chunk ``c`` of
stream ``s`` always draws from key ``(s, c)``, so results do not depend on
the number of worker threads.
"""

from concurrent.futures import ThreadPoolExecutor
import os

import numpy as np

CHUNK = 4096


def stream(seed, *key):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=tuple(key))))


def default_threads():
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def chunks(n, size=CHUNK):
    return [(c, start, min(size, n - start)) for c, start in enumerate(range(0, n, size))]


def map_chunks(fn, n, threads=1, size=CHUNK):
    """Apply ``fn(chunk_id, start, count)`` over chunks, results in chunk order."""
    jobs = chunks(n, size)
    if threads is None:
        threads = default_threads()
    if threads <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))
