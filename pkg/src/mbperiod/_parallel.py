"""Ordered parallel map over independent work items.

Curves are fitted independently, so batch layers fan out across a thread
pool. The compiled kernels release the GIL, which is where essentially all
the time goes; results come back in input order, so the output is
identical to a serial run regardless of thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor


def pmap(fn, items, threads=1):
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=int(threads)) as pool:
        return list(pool.map(fn, items))
