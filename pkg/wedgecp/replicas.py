"""Replica execution, serial or over a process pool."""
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Sequence, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar('T')


def worker_count(threads: int) -> int:
    """0 stands for one worker per CPU."""
    return (os.cpu_count() or 1) if threads == 0 else threads


def run_replicas(replica_fn: Callable[[Any], T], tasks: Sequence[Any], threads: int = 1) -> list[T]:
    """Maps `replica_fn` over `tasks` and returns the results in task order.

    `replica_fn` must be a module-level function and tasks must be picklable when more than one worker is used.
    """
    threads = worker_count(threads)
    if threads <= 1 or len(tasks) <= 1:
        return [replica_fn(task) for task in tasks]
    chunksize = max(1, len(tasks) // (4 * threads))
    logger.debug(f'running {len(tasks)} replicas on {threads} workers (chunksize={chunksize})')
    with ProcessPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(replica_fn, tasks, chunksize=chunksize))
