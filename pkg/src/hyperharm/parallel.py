"""Worker pool used for embarrassingly parallel loops.

Work is split into contiguous chunks and reassembled in index order, so the
result does not depend on the number of workers.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

_WORKERS = 1


def set_threads(n: int) -> None:
    """Number of worker threads for :func:`chunked_map` (1 disables the pool)."""
    global _WORKERS
    _WORKERS = max(1, int(n))


def get_threads() -> int:
    return _WORKERS


def chunked_map(func, n_items, min_chunk=64):
    """Evaluate ``func(start, stop)`` over ``range(n_items)`` and return the list of results.

    Chunks are contiguous, returned in order, and their boundaries depend
    only on `n_items` and `min_chunk`, never on the worker count.
    """
    if n_items == 0:
        return []
    workers = _WORKERS
    n_chunks = max(1, -(-n_items // min_chunk))
    bounds = [(n_items * i // n_chunks, n_items * (i + 1) // n_chunks) for i in range(n_chunks)]
    if workers == 1 or n_chunks == 1:
        return [func(a, b) for a, b in bounds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(func, a, b) for a, b in bounds]
        return [f.result() for f in futures]
