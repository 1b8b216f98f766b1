"""Deterministic work splitting for sample sweeps.

Samples are processed in fixed-size chunks whose boundaries do not depend on
the worker count; results are merged in chunk order, so any worker count
produces byte-identical output.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

CHUNK = 256


def chunk_bounds(n: int, chunk: int = CHUNK):
    return [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]


def chunked_map(fn, n: int, workers: int = 1, chunk: int = CHUNK) -> list:
    """Apply fn(lo, hi) over fixed chunks of range(n); results in chunk order."""
    bounds = chunk_bounds(n, chunk)
    if workers <= 1 or len(bounds) <= 1:
        return [fn(lo, hi) for lo, hi in bounds]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(lambda b: fn(*b), bounds))
