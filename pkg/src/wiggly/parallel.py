"""Deterministic worker-pool map.

Results always come back in input order regardless of completion
order, so parallel runs reduce identically to serial ones.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count(requested=None):
    if requested is not None and requested > 0:
        return int(requested)
    env = os.environ.get("WIGGLY_THREADS")
    if env:
        try:
            k = int(env)
            if k > 0:
                return k
        except ValueError:
            pass
    return min(8, os.cpu_count() or 1)


def pmap(fn, items, threads=None):
    """Ordered map over items with a bounded thread pool."""
    items = list(items)
    k = thread_count(threads)
    if k <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=k) as pool:
        return list(pool.map(fn, items))
