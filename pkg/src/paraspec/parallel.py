"""Order-preserving fan-out over fixed work chunks.

Chunk boundaries depend only on the sample count, never on the worker count,
so every chunk sees the same inputs (and the same adaptive step decisions)
whether it runs serially or in a pool.
"""
from concurrent.futures import ProcessPoolExecutor
import multiprocessing
import os

import numpy as np

CHUNK = 32


def default_workers():
    try:
        return max(1, int(os.environ.get("PARASPEC_WORKERS", "1")))
    except ValueError:
        return 1


def chunks(n, size=CHUNK):
    return [np.arange(lo, min(lo + size, n)) for lo in range(0, n, size)]


def pmap(fn, items, workers=None):
    items = list(items)
    workers = default_workers() if workers is None else int(workers)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=min(workers, len(items)), mp_context=ctx) as pool:
        return list(pool.map(fn, items))
