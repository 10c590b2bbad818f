"""Optional thread parallelism, capped by ``ROLLKIT_THREADS`` (default 1)."""

import os
from concurrent.futures import ThreadPoolExecutor


def max_threads():
    try:
        n = int(os.environ.get("ROLLKIT_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, n)


def parallel_map(fn, items):
    """Ordered map; results are identical whatever the thread count."""
    n = min(max_threads(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
