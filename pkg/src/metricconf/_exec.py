"""Chunked execution of resampling loops.

Iterations are cut into chunks whose boundaries depend only on the problem
(never on the worker count), and iteration ``i`` always draws from stream
``i``.  Results are therefore bitwise identical for any number of workers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

# cells held in memory per chunk, roughly
_CHUNK_BUDGET = 1 << 21


def chunk_size(cells_per_iteration: int) -> int:
    return int(max(16, min(8192, _CHUNK_BUDGET // max(1, cells_per_iteration))))


def chunks(total: int, size: int) -> list[tuple[int, int]]:
    return [(start, min(size, total - start)) for start in range(0, total, size)]


def map_ordered(fn, items, workers: int = 1) -> list:
    items = list(items)
    if workers is None or workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def run_iterations(fn, total: int, cells_per_iteration: int, workers: int = 1) -> np.ndarray:
    """Call ``fn(start, count)`` over fixed chunks and concatenate along axis 0."""
    parts = map_ordered(lambda c: fn(*c), chunks(total, chunk_size(cells_per_iteration)), workers)
    return np.concatenate(parts, axis=0)
