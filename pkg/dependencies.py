# bpire/dependencies.py
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from typing import Callable, Iterator, List, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

# spawn-key prefixes, one stream family per kind of task
TASK_KERNEL = 1
TASK_LIFE = 2
TASK_WALK = 3
TASK_RENEWAL = 4
TASK_LAW = 5


def get_streams(seed: int, workers: int, *key: int) -> List[np.random.Generator]:
    """Disjoint counter-based streams, one per worker, for the task identified by key."""
    root = np.random.SeedSequence(entropy=seed, spawn_key=tuple(key))
    return [np.random.Generator(np.random.Philox(child)) for child in root.spawn(workers)]


def get_rng(seed: int, *key: int) -> np.random.Generator:
    return get_streams(seed, 1, *key)[0]


def split(total: int, parts: int) -> List[int]:
    base, extra = divmod(total, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


@contextmanager
def get_executor(workers: int) -> Iterator[ThreadPoolExecutor]:
    executor = ThreadPoolExecutor(max_workers=workers)
    try:
        yield executor
    finally:
        executor.shutdown()


def run_ordered(fn: Callable[..., T], args: Sequence[tuple], workers: int) -> List[T]:
    """Apply fn to every argument tuple; results come back in argument order."""
    if workers <= 1 or len(args) <= 1:
        return [fn(*a) for a in args]
    with get_executor(workers) as executor:
        futures = [executor.submit(fn, *a) for a in args]
        return [f.result() for f in futures]
