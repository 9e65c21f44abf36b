"""
Command registry record and replica worker pool for mflab.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Sequence, TypeVar

import numpy as np

from .mflab_logging import get_logger

logger = get_logger("process")

T = TypeVar("T")
R = TypeVar("R")


@dataclass(frozen=True)
class Command:
    """One experiment command: its name and the function running it."""

    name: str
    handler: Callable[..., Dict[str, Any]]
    description: str = ""


class ReplicaPool:
    """Maps work items over a thread pool, returning results in input order."""

    def __init__(self, workers: int = 1):
        if workers < 1:
            raise ValueError("workers must be at least 1")
        self.workers = int(workers)

    def map(self, func: Callable[[T], R], items: Sequence[T]) -> List[R]:
        """
        Apply func to every item.

        Args:
            func: Work function; must not share mutable state across items
            items: Ordered work items

        Returns:
            Results in the order of items, independent of scheduling
        """
        items = list(items)
        if self.workers == 1 or len(items) <= 1:
            return [func(item) for item in items]
        logger.debug(f"Dispatching {len(items)} work items to {self.workers} workers")
        with ThreadPoolExecutor(max_workers=self.workers) as executor:
            return list(executor.map(func, items))

    def chunks(self, count: int) -> List[np.ndarray]:
        """Split range(count) into at most `workers` contiguous index chunks."""
        if count <= 0:
            return []
        parts = min(self.workers, count)
        return [c for c in np.array_split(np.arange(count), parts) if c.size]


_pool = ReplicaPool(1)


def get_pool() -> ReplicaPool:
    """Get the replica pool shared by the library modules."""
    return _pool


def init_pool(workers: int) -> ReplicaPool:
    """Replace the shared replica pool with one of the given size."""
    global _pool
    _pool = ReplicaPool(workers)
    logger.info(f"Replica pool initialized with {workers} worker(s)")
    return _pool
