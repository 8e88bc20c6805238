"""Deterministic block execution with an optional thread pool.

Work is split into fixed-size blocks and results are always combined in
block order, so estimates are bit-identical for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

BLOCK = 1 << 14


def run_blocks(total: int, fn, threads: int = 1, block: int = BLOCK) -> list:
    """Call fn(start, stop) over consecutive blocks; results in block order."""
    bounds = [(a, min(a + block, total)) for a in range(0, total, block)]
    if threads <= 1 or len(bounds) <= 1:
        return [fn(a, b) for a, b in bounds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda ab: fn(ab[0], ab[1]), bounds))
