"""Ordered parallel map over independent work items."""
import logging
from typing import Callable, Iterable, List, Optional, TypeVar

from joblib import Parallel, delayed

from lattice_spectra.config import PARALLEL_SETTINGS

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(func: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None) -> List[R]:
    """Apply ``func`` to every item, preserving input order.

    With one thread the map runs inline. Otherwise joblib dispatches to a
    thread pool; numpy and LAPACK release the GIL for the heavy parts.

    Args:
        func: Pure function of one item.
        items: Work items.
        threads: Worker cap; defaults to the configured thread count.

    Returns:
        List: Results in the order of ``items``.
    """
    workers = PARALLEL_SETTINGS["threads"] if threads is None else threads
    work = list(items)
    if workers is None or workers <= 1 or len(work) <= 1:
        return [func(item) for item in work]
    logger.debug(f"Dispatching {len(work)} items to {workers} threads")
    return Parallel(n_jobs=workers, prefer="threads")(delayed(func)(item) for item in work)
