import os
import sys
import time

import numpy as np

# Add the project root to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from dependencies import TASK_KERNEL, TASK_WALK, get_rng, get_streams, run_ordered, split


def slow_square(x: int, delay: float) -> int:
    time.sleep(delay)
    return x * x


def test_run_ordered_keeps_argument_order_across_threads():
    args = [(x, 0.02 * (5 - x)) for x in range(6)]
    assert run_ordered(slow_square, args, 4) == [x * x for x in range(6)]
    assert run_ordered(slow_square, args, 1) == [x * x for x in range(6)]


def test_streams_are_keyed_by_task():
    walk = get_rng(5, TASK_WALK).random(4)
    assert np.array_equal(walk, get_rng(5, TASK_WALK).random(4))
    assert not np.array_equal(walk, get_rng(5, TASK_KERNEL).random(4))
    a, b = get_streams(5, 2, TASK_WALK)
    assert not np.array_equal(a.random(4), b.random(4))


def test_split():
    assert split(10, 3) == [4, 3, 3]
    assert sum(split(7, 7)) == 7
