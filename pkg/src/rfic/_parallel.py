"""Thread task farm with a deterministic, index-ordered reduction."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def default_workers() -> int:
    env = os.environ.get("RFIC_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def run_tasks(fn: Callable[[T], R], tasks: Iterable[T], workers: int | None = None) -> list[R]:
    """Apply ``fn`` to every task; results come back in task order.

    The numba kernels release the GIL, so threads give real parallelism.
    Each task owns its RNG stream, hence the output does not depend on
    ``workers``.
    """
    tasks = list(tasks)
    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(fn, tasks))
