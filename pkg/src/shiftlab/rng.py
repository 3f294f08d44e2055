"""Counter-based random number generation.

Every latent code must be a pure function of (seed, stream_id, index) so
batches can be generated in any order, in shards, or one code at a time
and always come out bitwise identical.  We get this from the Philox
4x64 counter-based generator: the 128-bit key is (seed, stream_id) and
code ``i`` owns the counter blocks ``[i*bpc, (i+1)*bpc)`` where ``bpc``
is the number of 4-word blocks needed for ``dim`` values.

Gaussians are produced by inverse CDF of a 52-bit uniform, which
consumes exactly one 64-bit word per value.  Fixed consumption is what
makes the counter layout static; ziggurat-style samplers draw a variable
number of words and cannot be indexed this way.
"""

from __future__ import annotations

import numpy as np
from numpy.random import Philox
from scipy.special import ndtri

from .errors import InvalidArgumentError

WORDS_PER_BLOCK = 4
U64_MAX = 2**64 - 1

# Internal stream ids reserved by the library; user streams should stay
# well below these.
TARGET_STREAM_ID = U64_MAX - 1
MC_STREAM_BASE = 2**48


def check_u64(value: int, name: str) -> int:
    if not isinstance(value, (int, np.integer)):
        raise InvalidArgumentError(f"{name} must be an integer, got {type(value).__name__}")
    value = int(value)
    if not 0 <= value <= U64_MAX:
        raise InvalidArgumentError(f"{name} must be in [0, 2^64), got {value}")
    return value


def blocks_per_code(dim: int) -> int:
    return -(-dim // WORDS_PER_BLOCK)


def _u64_array(*values: int) -> np.ndarray:
    # A plain Python list with values >= 2^63 would be coerced through
    # float64 and silently mangled; build the array explicitly.
    return np.array(values, dtype=np.uint64)


def raw_words(seed: int, stream_id: int, start_block: int, n_words: int) -> np.ndarray:
    """The Philox word stream for key (seed, stream_id) from a block boundary."""
    seed = check_u64(seed, "seed")
    stream_id = check_u64(stream_id, "stream_id")
    bg = Philox(counter=_u64_array(start_block, 0, 0, 0),
                key=_u64_array(seed, stream_id))
    return bg.random_raw(n_words)


def uniform_open01(words: np.ndarray) -> np.ndarray:
    # 52 high bits plus a half-step offset: every result is exactly
    # representable and strictly inside (0, 1), so ndtri never sees 0 or 1.
    # (Keeping a 53rd bit would round the top value up to exactly 1.0.)
    return ((words >> np.uint64(12)).astype(np.float64) + 0.5) * 2.0**-52


def gaussian_codes(dim: int, start: int, stop: int, seed: int, stream_id: int) -> np.ndarray:
    """Standard-normal codes ``start..stop-1`` as a (stop-start, dim) array.

    Code ``i`` depends only on (seed, stream_id, i); generating any
    sub-range reproduces the same rows as generating the full batch.
    """
    if dim < 1:
        raise InvalidArgumentError(f"dim must be >= 1, got {dim}")
    if not 0 <= start <= stop:
        raise InvalidArgumentError(f"bad code range [{start}, {stop})")
    count = stop - start
    if count == 0:
        return np.empty((0, dim))
    bpc = blocks_per_code(dim)
    words = raw_words(seed, stream_id, start * bpc, count * bpc * WORDS_PER_BLOCK)
    words = words.reshape(count, bpc * WORDS_PER_BLOCK)[:, :dim]
    return ndtri(uniform_open01(words))


def bulk_generator(seed: int, stream_id: int) -> np.random.Generator:
    """A sequential generator for Monte Carlo work.

    Deterministic for a given (seed, stream_id) but with no per-draw
    counter contract; use :func:`gaussian_codes` when indexed
    reproducibility matters.
    """
    seed = check_u64(seed, "seed")
    stream_id = check_u64(stream_id, "stream_id")
    return np.random.Generator(Philox(key=_u64_array(seed, stream_id)))
