import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from shufflegame import RandomSource, derive_seed


@given(st.integers(0, 2**64 - 1), st.integers(0, 10_000))
def test_derived_seeds_are_stable(seed, index):
    assert derive_seed(seed, index) == derive_seed(seed, index)
    assert 0 <= derive_seed(seed, index) < 2**64


def test_neighbouring_indices_differ():
    seeds = {derive_seed(7, i) for i in range(1000)}
    assert len(seeds) == 1000


@given(st.integers(0, 2**64 - 1))
def test_same_seed_same_stream(seed):
    a, b = RandomSource(seed), RandomSource(seed)
    assert np.array_equal(a.uniform(16), b.uniform(16))
    assert a.integers(0, 100) == b.integers(0, 100)
    assert a.choice("abcdef") == b.choice("abcdef")


def test_vector_draw_equals_scalar_draws():
    a, b = RandomSource(3), RandomSource(3)
    assert np.array_equal(a.uniform(5), [b.uniform() for _ in range(5)])


def test_spawned_streams_are_independent():
    kids = RandomSource(11).spawn(3)
    draws = [k.uniform(4).tolist() for k in kids]
    assert len({tuple(d) for d in draws}) == 3
    assert [k.seed for k in RandomSource(11).spawn(3)] == [k.seed for k in kids]
