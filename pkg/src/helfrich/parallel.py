"""Thread-pool mapping capped by the ``HELFRICH_THREADS`` environment variable."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def n_threads() -> int:
    """Worker count: ``HELFRICH_THREADS`` if set (at least 1), else the CPU count."""
    env = os.environ.get("HELFRICH_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"HELFRICH_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def pmap(func, items) -> list:
    """``list(map(func, items))``, evaluated on a thread pool; order is preserved."""
    items = list(items)
    k = min(n_threads(), len(items))
    if k <= 1:
        return [func(it) for it in items]
    with ThreadPoolExecutor(max_workers=k) as ex:
        return list(ex.map(func, items))
