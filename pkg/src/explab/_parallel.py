"""Thread-count resolution and chunked execution of nogil kernels."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")

THREADS_ENV = "EXPLAB_THREADS"


def resolve_threads(threads: int | None = None) -> int:
    """Explicit value, then $EXPLAB_THREADS, then the number of CPUs."""
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        if env:
            threads = int(env)
        else:
            threads = os.cpu_count() or 1
    if threads < 1:
        raise ValueError("thread count must be >= 1")
    return threads


def run_all(tasks: Sequence[Callable[[], T]], threads: int | None = None) -> list[T]:
    """Run callables on a pool; results come back in task order."""
    n = resolve_threads(threads)
    if n == 1 or len(tasks) <= 1:
        return [t() for t in tasks]
    with ThreadPoolExecutor(max_workers=n) as pool:
        futures = [pool.submit(t) for t in tasks]
        return [f.result() for f in futures]


def chunk_bounds(total: int, size: int) -> list[tuple[int, int]]:
    return [(i, min(i + size, total)) for i in range(0, total, size)]
