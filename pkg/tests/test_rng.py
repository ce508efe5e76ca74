"""Stream determinism and distributional sanity of the generator."""

import numpy as np

from sgnn.rng import Rng


def _reference_splitmix(seed: int, n: int) -> list[int]:
    """Scalar pure-Python SplitMix64, independent of the vectorized path."""
    mask = (1 << 64) - 1
    out = []
    state = seed & mask
    for _ in range(n):
        state = (state + 0x9E3779B97F4A7C15) & mask
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        out.append(z ^ (z >> 31))
    return out


def test_matches_scalar_reference():
    for seed in (0, 1, 42, 2**63 + 11):
        got = Rng(seed).next_uint64(8).tolist()
        assert got == _reference_splitmix(seed, 8)


def test_blocks_equal_single_calls():
    a = Rng(5)
    whole = a.next_uint64(64)
    b = Rng(5)
    pieces = np.concatenate([b.next_uint64(k) for k in (1, 3, 28, 32)])
    assert np.array_equal(whole, pieces)


def test_uniform_open_interval():
    u = Rng(11).uniform(200000)
    assert u.min() > 0.0
    assert u.max() < 1.0
    assert abs(u.mean() - 0.5) < 3 * 0.2887 / np.sqrt(len(u))


def test_child_streams_differ_and_are_stable():
    root = Rng(9)
    a = root.child("clocks").uniform(100)
    b = root.child("init").uniform(100)
    assert not np.array_equal(a, b)
    assert np.array_equal(a, Rng(9).child("clocks").uniform(100))


def test_normal_moments():
    x = Rng(21).normal(200001)
    assert abs(x.mean()) < 3 / np.sqrt(len(x))
    assert abs(x.std() - 1.0) < 0.01


def test_shuffle_is_permutation():
    values = np.arange(257)
    out = Rng(3).shuffle(values)
    assert sorted(out.tolist()) == values.tolist()
    assert not np.array_equal(out, values)


def test_uniform_range_bounds():
    x = Rng(4).uniform_range(-2.0, 3.0, 10000)
    assert x.min() >= -2.0 and x.max() <= 3.0
    assert abs(x.mean() - 0.5) < 0.1
