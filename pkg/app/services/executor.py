# Copyright (C) 2024-2025, Pyronear.

# This program is licensed under the Apache License 2.0.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0> for full license details.

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, TypeVar

__all__ = ["thread_map"]

T = TypeVar("T")
R = TypeVar("R")


def thread_map(func: Callable[[T], R], items: Iterable[T], threads: int = 1) -> List[R]:
    """Maps `func` over `items`, in input order, on up to `threads` worker threads.

    Results never depend on `threads`: each item must carry everything its computation needs
    (including its random stream coordinates).
    """
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    items = list(items)
    if threads == 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(func, items))

