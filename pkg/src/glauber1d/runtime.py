"""Deterministic work scheduling.

Work items are indexed, each item derives its randomness from its own index
and writes to its own slot, so results are independent of which worker runs
what and identical for any thread count.  The JIT kernels release the GIL,
which is where threads actually overlap.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor


def ordered_map(fn, count: int, threads: int = 1) -> None:
    """Run fn(0..count-1), possibly on a thread pool; completion is awaited.

    fn must confine its effects to index-owned slots; under that contract the
    result is bit-identical for every `threads` value.
    """
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    if threads == 1 or count <= 1:
        for i in range(count):
            fn(i)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        # list() drains the iterator so worker exceptions surface here
        list(pool.map(fn, range(count)))
