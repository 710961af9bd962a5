"""Chunked thread parallelism with thread-count-independent results.

Work is split into fixed-size chunks whatever the worker count, and chunk outputs
are concatenated in order, so the bits never depend on ``threads``.
"""
from concurrent.futures import ThreadPoolExecutor

import numpy as np

CHUNK = 1 << 15
_threads = 1


def set_threads(n):
    global _threads
    _threads = max(1, int(n))


def get_threads():
    return _threads


def map_chunks(fn, *arrays):
    """Apply ``fn`` to aligned row-chunks of ``arrays``; concatenate each output."""
    n = arrays[0].shape[0]
    if n <= CHUNK:
        return fn(*arrays)
    bounds = [(lo, min(lo + CHUNK, n)) for lo in range(0, n, CHUNK)]
    jobs = [tuple(a[lo:hi] for a in arrays) for lo, hi in bounds]
    if _threads > 1:
        with ThreadPoolExecutor(max_workers=_threads) as pool:
            parts = list(pool.map(lambda args: fn(*args), jobs))
    else:
        parts = [fn(*args) for args in jobs]
    if isinstance(parts[0], tuple):
        return tuple(np.concatenate([p[i] for p in parts]) for i in range(len(parts[0])))
    return np.concatenate(parts)
