"""Deterministic work distribution.

Workers must be pure; results are always combined in input order, so the
output is bit-identical no matter how many threads execute the map.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def default_threads() -> int:
    return os.cpu_count() or 1


def ordered_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> list[R]:
    """Apply ``fn`` to every item, returning results in input order.

    With ``threads <= 1`` this is a plain sequential map. Otherwise items are
    evaluated on a thread pool; ``ThreadPoolExecutor.map`` already yields
    results in submission order, which is the ordered-reduction contract the
    metric pipelines rely on.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def ordered_sum(values: Sequence[float]) -> float:
    """Left-to-right float64 accumulation (fixed reduction order)."""
    total = 0.0
    for v in values:
        total += v
    return total
