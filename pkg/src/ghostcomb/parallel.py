"""Thread-pool helper with deterministic ordering.

Work is split into fixed-size chunks before any thread starts, and the
results are reassembled in chunk order. Combined with per-chunk RNG
derivation (see seeding.py) this makes outputs byte-identical for any
thread count, including 1.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def map_ordered(fn: Callable[[T], R], items: Sequence[T], threads: int = 1) -> list[R]:
    """Apply fn to each item, preserving input order in the result."""
    if threads is None or threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def chunk_sizes(total: int, chunk: int) -> list[int]:
    """Fixed chunking of `total` work items into pieces of size `chunk`.

    The split depends only on (total, chunk), never on the thread count.
    """
    if total < 0:
        raise ValueError("total must be non-negative")
    if chunk <= 0:
        raise ValueError("chunk must be positive")
    sizes = [chunk] * (total // chunk)
    if total % chunk:
        sizes.append(total % chunk)
    return sizes
