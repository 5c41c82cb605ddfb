import threading
import time

import pytest

from steerguard.core.errors import ValidationError
from steerguard.tasks import map_ordered


def test_order_is_preserved():
    def slow_square(x):
        time.sleep(0.001 * (5 - x))
        return x * x

    assert map_ordered(slow_square, range(5), jobs=3) == [0, 1, 4, 9, 16]


def test_uses_several_threads():
    seen = set()

    def record(x):
        seen.add(threading.get_ident())
        time.sleep(0.01)
        return x

    map_ordered(record, range(8), jobs=4)
    assert len(seen) > 1


def test_empty():
    assert map_ordered(str, [], jobs=2) == []


def test_rejects_jobs():
    with pytest.raises(ValidationError):
        map_ordered(str, [1], jobs=0)
