"""Thread-pool map with results in submission order"""
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, Iterable, List, Optional, TypeVar

from mxfar.config import get_settings

T = TypeVar("T")
R = TypeVar("R")


def resolve_threads(threads: Optional[int]) -> int:
    if threads is None:
        return get_settings().resolved_threads()
    return max(1, int(threads))


def ordered_map(function: Callable[[T], R], items: Iterable[T], threads: Optional[int] = 1) -> List[R]:
    """
    Apply ``function`` to every item, possibly in parallel.

    Results come back in input order whatever the worker count, so output
    never depends on scheduling. Exceptions raised by ``function`` propagate.
    """
    items = list(items)
    workers = min(resolve_threads(threads), max(len(items), 1))
    if workers == 1:
        return [function(item) for item in items]

    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = {executor.submit(function, item): index for index, item in enumerate(items)}
        ordered = [(futures[future], future.result()) for future in as_completed(futures)]
    ordered.sort(key=lambda pair: pair[0])
    return [result for _, result in ordered]
