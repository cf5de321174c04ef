"""Order-preserving parallel map for independent grid jobs."""

import os
from concurrent.futures import ProcessPoolExecutor

THREADS_ENV = "ROBUST_MISO_THREADS"


def worker_count(workers=None) -> int:
    """Explicit count, else the environment variable, else 1."""
    if workers is None:
        raw = os.environ.get(THREADS_ENV, "1")
        try:
            workers = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if workers < 1:
        raise ValueError(f"worker count must be >= 1, got {workers}")
    return workers


def ordered_map(fn, items, workers=None, chunksize=8):
    """``[fn(x) for x in items]``, optionally spread over processes.

    Results keep the order of ``items`` so outputs do not depend on the
    worker count. ``fn`` must be picklable for more than one worker.
    """
    items = list(items)
    n = worker_count(workers)
    if n == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items, chunksize=chunksize))
