import os
from concurrent.futures import ThreadPoolExecutor


def worker_count() -> int:
    """Thread cap from ``FLAGBUNDLE_THREADS`` (default: CPU count, at most 8)."""
    raw = os.environ.get("FLAGBUNDLE_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = min(os.cpu_count() or 1, 8)
    return max(n, 1)


def pmap(fn, items):
    """Ordered map over a thread pool; numpy releases the GIL in the heavy kernels."""
    items = list(items)
    n = min(worker_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))
