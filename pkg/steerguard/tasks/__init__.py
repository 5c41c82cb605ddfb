"""
Per-image work fan-out.

Results always come back in input order, so aggregated numbers do not depend
on worker scheduling.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Sequence, TypeVar

from steerguard.core.errors import ValidationError

logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')


def map_ordered(fn: Callable[[T], R], items: Sequence[T], jobs: int = 1) -> List[R]:
    if jobs < 1:
        raise ValidationError(f'jobs must be >= 1, got {jobs}')
    items = list(items)
    if jobs == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    logger.debug(f'map_ordered: {len(items)} items on {jobs} workers')
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))
