"""Order-preserving parallel map used by dataset construction and scoring."""

from concurrent.futures import ThreadPoolExecutor


def ordered_map(fn, items, threads: int = 1):
    """Apply ``fn`` over ``items``, preserving order regardless of thread count."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
