import numpy as np
import pytest
from hypothesis import given, strategies as st

from amsplit import rng

seeds = st.integers(min_value=0, max_value=2**64 - 1)


@pytest.mark.parametrize("seed, rep", [(0, 0), (42, 0), (42, 7), (2**64 - 1, 2**64 - 1), (123456789, 2**40)])
def test_kernel_stream_matches_numpy_philox(seed, rep):
    expected = np.random.Philox(key=rng.philox_key(seed, rep)).random_raw(1000)
    np.testing.assert_array_equal(rng.fill_raw(np.uint64(seed), np.uint64(rep), 1000), expected)


@given(seeds, st.integers(min_value=0, max_value=2**20))
def test_uniform_stream_matches_bulk_draw(seed, rep):
    stream = rng.UniformStream(seed, rep, block=7)
    np.testing.assert_array_equal(stream.take(20), rng.uniforms(seed, rep, 20))
    assert stream.consumed == 20


@given(st.lists(st.integers(min_value=0, max_value=2**64 - 1), min_size=1, max_size=50))
def test_uniforms_lie_strictly_inside_unit_interval(raws):
    u = rng.raw_to_uniform(np.array(raws, dtype=np.uint64))
    assert np.all(u > 0.0) and np.all(u < 1.0)


def test_extreme_raw_values_map_inside_unit_interval():
    u = rng.raw_to_uniform(np.array([0, 2**64 - 1], dtype=np.uint64))
    assert u[0] == 2.0**-53
    assert u[1] == 1.0 - 2.0**-53
    assert u[1] < 1.0


def test_substreams_differ():
    assert not np.array_equal(rng.uniforms(1, 0, 8), rng.uniforms(1, 1, 8))
    assert not np.array_equal(rng.uniforms(1, 0, 8), rng.uniforms(2, 0, 8))


@pytest.mark.parametrize("seed, rep", [(-1, 0), (0, -1), (2**64, 0)])
def test_out_of_range_keys_rejected(seed, rep):
    with pytest.raises(ValueError):
        rng.philox_key(seed, rep)
