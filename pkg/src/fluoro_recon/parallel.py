"""Order-preserving process-parallel map capped by ``FLUORO_RECON_THREADS``."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

ENV_VAR = "FLUORO_RECON_THREADS"


def worker_count() -> int:
    raw = os.environ.get(ENV_VAR)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValueError(f"{ENV_VAR} must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


def parallel_map(fn, items, workers: int | None = None) -> list:
    """``[fn(x) for x in items]``, fanned out over processes when allowed."""
    items = list(items)
    workers = min(workers or worker_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))
