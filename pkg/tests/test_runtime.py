import numpy as np
import pytest

from specpop.runtime import parallel_map, rng_stream


def _square(x):
    return x * x


class TestRngStream:
    def test_same_key_same_stream(self):
        a = rng_stream(7, "collect", 3, 1).random(5)
        b = rng_stream(7, "collect", 3, 1).random(5)
        assert np.array_equal(a, b)

    def test_different_parts_differ(self):
        a = rng_stream(7, "collect", 3, 1).random(5)
        b = rng_stream(7, "collect", 3, 2).random(5)
        c = rng_stream(7, "evaluate", 3, 1).random(5)
        d = rng_stream(8, "collect", 3, 1).random(5)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)
        assert not np.array_equal(a, d)

    def test_label_order_matters(self):
        a = rng_stream(0, "x", "y").random(3)
        b = rng_stream(0, "y", "x").random(3)
        assert not np.array_equal(a, b)


class TestParallelMap:
    def test_sequential_matches_input_order(self):
        got = parallel_map(_square, [3, 1, 2], workers=1)
        assert got == [9, 1, 4]

    def test_worker_count_does_not_change_results(self):
        tasks = list(range(13))
        seq = parallel_map(_square, tasks, workers=1)
        par = parallel_map(_square, tasks, workers=4)
        assert seq == par

    def test_empty_input(self):
        assert parallel_map(_square, [], workers=2) == []

    def test_invalid_worker_count(self):
        with pytest.raises(ValueError):
            parallel_map(_square, [1], workers=0)
