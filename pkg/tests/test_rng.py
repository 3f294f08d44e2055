import numpy as np
import pytest

from shiftlab.errors import InvalidArgumentError
from shiftlab.rng import (
    MC_STREAM_BASE,
    TARGET_STREAM_ID,
    U64_MAX,
    blocks_per_code,
    bulk_generator,
    gaussian_codes,
    raw_words,
    uniform_open01,
)

SEEDS = [0, 1, 7, 1234, U64_MAX]


def test_blocks_per_code():
    assert blocks_per_code(1) == 1
    assert blocks_per_code(4) == 1
    assert blocks_per_code(5) == 2
    assert blocks_per_code(6) == 2
    assert blocks_per_code(8) == 2
    assert blocks_per_code(9) == 3
    assert blocks_per_code(3072) == 768


@pytest.mark.parametrize("seed", SEEDS)
def test_raw_words_deterministic(seed):
    a = raw_words(seed, 0, 0, 64)
    b = raw_words(seed, 0, 0, 64)
    assert np.array_equal(a, b)
    assert a.dtype == np.uint64


@pytest.mark.parametrize("stream_id", [0, 1, MC_STREAM_BASE, TARGET_STREAM_ID])
def test_raw_words_counter_offset_matches_tail(stream_id):
    # Starting at block k must reproduce the tail of the stream from 0.
    full = raw_words(99, stream_id, 0, 48)
    for start_block in (1, 2, 5, 11):
        tail = raw_words(99, stream_id, start_block, 48 - 4 * start_block)
        assert np.array_equal(full[4 * start_block:], tail)


def test_distinct_keys_distinct_streams():
    base = raw_words(5, 0, 0, 32)
    assert not np.array_equal(base, raw_words(6, 0, 0, 32))
    assert not np.array_equal(base, raw_words(5, 1, 0, 32))
    assert not np.array_equal(base, raw_words(5, TARGET_STREAM_ID, 0, 32))


def test_uniform_open01_range_and_mapping():
    words = np.array([0, 1, U64_MAX], dtype=np.uint64)
    u = uniform_open01(words)
    assert u[0] == 2.0**-53
    assert u[2] == 1.0 - 2.0**-53
    assert np.all(u > 0.0) and np.all(u < 1.0)

    big = uniform_open01(raw_words(3, 0, 0, 100_000))
    assert np.all(big > 0.0) and np.all(big < 1.0)
    assert abs(big.mean() - 0.5) < 0.01


@pytest.mark.parametrize("dim", [1, 3, 4, 6, 7, 3072])
def test_gaussian_codes_subrange_purity(dim):
    # Code i is a pure function of (seed, stream_id, i): any sub-range
    # equals the corresponding rows of the full batch.
    full = gaussian_codes(dim, 0, 40, 11, 0)
    assert full.shape == (40, dim)
    for start, stop in [(0, 1), (7, 13), (39, 40), (0, 40), (20, 20)]:
        part = gaussian_codes(dim, start, stop, 11, 0)
        assert np.array_equal(full[start:stop], part)


def test_gaussian_codes_sharding_equivalence():
    whole = gaussian_codes(6, 0, 100, 21, 4)
    shards = np.concatenate([
        gaussian_codes(6, 0, 33, 21, 4),
        gaussian_codes(6, 33, 71, 21, 4),
        gaussian_codes(6, 71, 100, 21, 4),
    ])
    assert np.array_equal(whole, shards)


def test_gaussian_codes_moments():
    x = gaussian_codes(8, 0, 50_000, 77, 0).ravel()
    assert abs(x.mean()) < 0.01
    assert abs(x.std() - 1.0) < 0.01
    assert np.all(np.isfinite(x))


def test_gaussian_codes_validation():
    with pytest.raises(InvalidArgumentError):
        gaussian_codes(0, 0, 10, 1, 0)
    with pytest.raises(InvalidArgumentError):
        gaussian_codes(3, 5, 2, 1, 0)
    with pytest.raises(InvalidArgumentError):
        gaussian_codes(3, 0, 10, -1, 0)
    with pytest.raises(InvalidArgumentError):
        gaussian_codes(3, 0, 10, 0, U64_MAX + 1)
    with pytest.raises(InvalidArgumentError):
        raw_words(1.5, 0, 0, 4)


def test_bulk_generator_deterministic():
    a = bulk_generator(9, MC_STREAM_BASE).standard_normal(1000)
    b = bulk_generator(9, MC_STREAM_BASE).standard_normal(1000)
    c = bulk_generator(9, MC_STREAM_BASE + 1).standard_normal(1000)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
