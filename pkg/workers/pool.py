# workers/pool.py
"""Process pool for independent Monte-Carlo trials and sweep points."""
from __future__ import annotations

import logging
import multiprocessing as mp
from typing import Callable, Iterable, List, Optional, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

try:
    MPCTX = mp.get_context("fork")
except ValueError:
    MPCTX = mp.get_context()


def map_ordered(fn: Callable[[T], R], items: Iterable[T], processes: Optional[int] = 1,
                chunksize: int = 1) -> List[R]:
    """
    Map ``fn`` over ``items`` preserving input order. ``processes`` of 1 (or
    None) runs inline; results never depend on the worker count as long as
    ``fn`` derives its randomness from the item alone.
    """
    items = list(items)
    if not processes or processes <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    logger.debug("dispatching %d items over %d processes", len(items), processes)
    with MPCTX.Pool(processes=processes) as pool:
        return pool.map(fn, items, chunksize=chunksize)
