import os
from concurrent.futures import ThreadPoolExecutor

THREADS_ENV = "DYNABG_THREADS"


def worker_count(requested: int | None = None) -> int:
    """Resolve a worker count, capped by ``DYNABG_THREADS`` when set."""
    cap = os.environ.get(THREADS_ENV)
    n = requested if requested is not None else (int(cap) if cap else 1)
    if cap:
        n = min(n, int(cap))
    return max(1, n)


def pmap(fn, items, workers: int | None = None) -> list:
    """Order-preserving map; threads only when more than one worker."""
    items = list(items)
    n = worker_count(workers)
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))
