from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, List, TypeVar

import structlog

logger = structlog.get_logger()

T = TypeVar("T")
R = TypeVar("R")


def run_jobs(fn: Callable[[T], R], items: Iterable[T], n_jobs: int = 1) -> List[R]:
    """
    Apply `fn` to independent jobs, in worker processes when n_jobs > 1.
    Results come back in input order, so callers assemble them exactly as a sequential run would.
    `fn` must be a module-level function so it can be pickled.
    """
    items = list(items)
    if n_jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]

    workers = min(n_jobs, len(items))
    logger.debug("Dispatching jobs", jobs=len(items), workers=workers)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
