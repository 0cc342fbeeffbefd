"""Thread-count setting and an order-preserving parallel map.

Work is split into chunks whose boundaries do not depend on the thread
count, and results are combined in chunk order, so outputs are bit-identical
for any number of threads.
"""
from __future__ import annotations

import atexit
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")

ENV_VAR = "LATTICE_EXTREMAL_THREADS"

_threads: int | None = None
_pool: ThreadPoolExecutor | None = None
_pool_size = 0


def default_threads() -> int:
    env = os.environ.get(ENV_VAR)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def set_threads(n: int | None) -> None:
    global _threads
    _threads = None if n is None else max(1, int(n))


def configured_threads() -> int | None:
    """The explicit setting, or None when the default applies."""
    return _threads


def get_threads() -> int:
    return _threads if _threads is not None else default_threads()


def _executor(n: int) -> ThreadPoolExecutor:
    global _pool, _pool_size
    if _pool is None or _pool_size != n:
        if _pool is not None:
            _pool.shutdown(wait=True)
        _pool, _pool_size = ThreadPoolExecutor(max_workers=n), n
    return _pool


@atexit.register
def _shutdown() -> None:
    if _pool is not None:
        _pool.shutdown(wait=False)


def map_ordered(fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
    items = list(items)
    n = min(get_threads(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    return list(_executor(get_threads()).map(fn, items))
