import numpy as np
from hypothesis import given, strategies as st

from matchkit import rng
from matchkit.numdiff import relative_error


@given(st.integers(0, 2**32 - 1), st.integers(1, 40), st.integers(1, 40))
def test_streams_extend_by_prefix(seed, a, b):
    short = rng.open_uniforms(seed, (rng.MEN, 0), (min(a, b), 3))
    long = rng.open_uniforms(seed, (rng.MEN, 0), (max(a, b), 3))
    np.testing.assert_array_equal(long[:min(a, b)], short)
    assert np.all((long > 0) & (long < 1))


def test_keys_are_independent():
    a = rng.gumbel(1, (rng.MEN, 0), (5, 2))
    assert not np.array_equal(a, rng.gumbel(1, (rng.WOMEN, 0), (5, 2)))
    assert not np.array_equal(a, rng.gumbel(1, (rng.MEN, 1), (5, 2)))


def test_normal_moments():
    z = rng.normal(3, (rng.DRAWS, 0, 0), (200_000, 1))
    assert abs(z.mean()) < 0.01 and abs(z.std() - 1) < 0.01


def test_relative_error_floor():
    assert relative_error([1e-9], [0.0]) == 1e-3
    assert relative_error([2.0], [1.0]) == 1.0
