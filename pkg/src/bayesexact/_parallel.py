import os
from concurrent.futures import ProcessPoolExecutor


def default_workers() -> int:
    """Worker count; ``BAYESEXACT_WORKERS`` overrides the default of 1."""
    return max(1, int(os.environ.get("BAYESEXACT_WORKERS", "1")))


def pmap(func, items, workers=None, chunksize=None):
    """Order-preserving map, in-process for one worker, else over processes.

    ``func`` and the items must be picklable when ``workers > 1``.
    """
    items = list(items)
    workers = default_workers() if workers is None else int(workers)
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    chunksize = chunksize or max(1, len(items) // (workers * 8))
    with ProcessPoolExecutor(workers) as pool:
        return list(pool.map(func, items, chunksize=chunksize))
