"""Thread pool that runs one function per simulated worker."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor, wait
from typing import Callable, TypeVar

from core.errors import DeadlockError

logger = logging.getLogger(__name__)

T = TypeVar("T")


def run_workers(n_workers: int, target: Callable[[int], T]) -> list[T]:
    """Run ``target(w)`` for every worker concurrently and collect results in order.

    Workers block on each other, so every worker gets its own thread.  When
    several fail, the first error that is not a downstream deadlock wins.
    """

    with ThreadPoolExecutor(max_workers=n_workers, thread_name_prefix="worker") as pool:
        futures = [pool.submit(target, w) for w in range(n_workers)]
        wait(futures)
    errors = [f.exception() for f in futures if f.exception() is not None]
    if errors:
        for w, f in enumerate(futures):
            if f.exception() is not None:
                logger.debug("worker %d failed: %s", w, f.exception())
        primary = next((e for e in errors if not isinstance(e, DeadlockError)), errors[0])
        raise primary
    return [f.result() for f in futures]
