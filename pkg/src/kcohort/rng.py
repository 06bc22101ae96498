"""Deterministic keyed random streams.

Every random quantity in the package is a pure function of a
:class:`StreamKey` and a counter.  The word generator mixes the key fields
and the counter through a fixed 64-bit avalanche chain, so any single draw
is O(1), random-access, and bit-identical on every platform and under any
degree of parallelism.  Two users touching the same dimension under the
same seeds therefore observe exactly the same gamma/uniform/gaussian
draws, which is the consistency property the samplers rely on.

Scalar entry points operate on Python integers; the ``*_array`` variants
operate on (broadcastable) numpy arrays and produce bit-identical values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF

# Substream tags (8-bit).  One tag per independent random quantity.
SUBSTREAM_GAMMA_R = 1      # the r draws of the weighted sampler
SUBSTREAM_GAMMA_C = 2      # the c draws of the weighted sampler
SUBSTREAM_BETA = 3         # the beta draws of the weighted sampler
SUBSTREAM_PROJECTION = 4   # gaussian projection coefficients
SUBSTREAM_PERMUTATION = 5  # per-dimension words standing in for a permutation
SUBSTREAM_SPLIT_SEED = 6   # per-(iteration, cohort) seeds of the splitter
SUBSTREAM_BUCKET = 7       # random-grouping bucket draws

# Source-of-truth constant table.  _GOLDEN spreads small field values before
# each avalanche round; the five salts keep the rounds distinct.
_GOLDEN = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB
_SALTS = (
    0xA0761D6478BD642F,  # experiment seed round
    0xE7037ED1A0B428DB,  # sample seed round
    0x8EBC6AF09C88C6E3,  # substream round
    0x589965CC75374CC3,  # counter round
    0x1D8E4E27C47D124F,  # dimension round
)

_U64_GOLDEN = np.uint64(_GOLDEN)
_U64_MIX_A = np.uint64(_MIX_A)
_U64_MIX_B = np.uint64(_MIX_B)
_U64_SALTS = tuple(np.uint64(s) for s in _SALTS)
_TO_UNIT = 2.0 ** -52


@dataclass(frozen=True)
class StreamKey:
    """Addresses one random stream.

    ``dimension`` carries the feature index so that draws are shared across
    all vectors touching that dimension; ``substream`` separates the
    different random quantities drawn for one dimension.
    """

    experiment_seed: int
    sample_seed: int
    dimension: int = 0
    substream: int = 0


def mix64(z: int) -> int:
    """SplitMix64 finalizer: a bijective 64-bit avalanche."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX_A) & MASK64
    z = ((z ^ (z >> 27)) * _MIX_B) & MASK64
    return z ^ (z >> 31)


def raw_word(key: StreamKey, counter: int) -> int:
    """The raw 64-bit word at (key, counter).

    Fields are folded one per round, dimension last, so vectorized callers
    can share the prefix of the chain across many dimensions.
    """
    z = mix64(_SALTS[0] + (key.experiment_seed * _GOLDEN & MASK64))
    z = mix64(z + _SALTS[1] + (key.sample_seed * _GOLDEN & MASK64))
    z = mix64(z + _SALTS[2] + (key.substream * _GOLDEN & MASK64))
    z = mix64(z + _SALTS[3] + (counter * _GOLDEN & MASK64))
    z = mix64(z + _SALTS[4] + (key.dimension * _GOLDEN & MASK64))
    return z


def _word_to_unit(word: int) -> float:
    # (w >> 12) + 0.5 lies in [0.5, 2^52 - 0.5], every value exactly
    # representable in float64, so neither endpoint is reachable at any word.
    # (A 53-bit variant would round 2^53 - 0.5 up to 2^53 and yield 1.0.)
    return ((word >> 12) + 0.5) * _TO_UNIT


def uniform01(key: StreamKey, counter: int) -> float:
    """Uniform draw strictly inside (0, 1)."""
    return _word_to_unit(raw_word(key, counter))


def gamma21(key: StreamKey, counter: int) -> float:
    """Gamma(shape 2, scale 1) draw: the sum of two Exp(1) variates.

    Logical counter k consumes the uniform words at counters 2k and 2k+1.
    """
    u1 = uniform01(key, 2 * counter)
    u2 = uniform01(key, 2 * counter + 1)
    return -np.log(u1) - np.log(u2)


def gaussian(key: StreamKey, counter: int) -> float:
    """Standard normal via Box-Muller, discarding the second variate."""
    u1 = uniform01(key, 2 * counter)
    u2 = uniform01(key, 2 * counter + 1)
    return float(np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2))


# --- vectorized forms -------------------------------------------------------
#
# All five coordinates may be scalars or broadcastable arrays.  The chain is
# identical to raw_word(): numpy uint64 arithmetic wraps mod 2^64.


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _U64_MIX_A
    z = (z ^ (z >> np.uint64(27))) * _U64_MIX_B
    return z ^ (z >> np.uint64(31))


def _as_u64(value) -> np.ndarray:
    arr = np.asarray(value)
    if arr.dtype == np.uint64:
        return arr
    # Signed/object inputs are reduced mod 2^64 the same way Python ints are.
    return arr.astype(np.int64, copy=False).view(np.uint64) if arr.dtype.kind == "i" \
        else arr.astype(np.uint64)


def word_array(experiment_seed, sample_seed, substream, counter, dimension) -> np.ndarray:
    """Vectorized :func:`raw_word` over broadcastable coordinates."""
    with np.errstate(over="ignore"):  # wraparound mod 2^64 is the semantics
        z = _mix64_array(_U64_SALTS[0] + _as_u64(experiment_seed) * _U64_GOLDEN)
        z = _mix64_array(z + _U64_SALTS[1] + _as_u64(sample_seed) * _U64_GOLDEN)
        z = _mix64_array(z + _U64_SALTS[2] + _as_u64(substream) * _U64_GOLDEN)
        z = _mix64_array(z + _U64_SALTS[3] + _as_u64(counter) * _U64_GOLDEN)
        z = _mix64_array(z + _U64_SALTS[4] + _as_u64(dimension) * _U64_GOLDEN)
    return z


def units_array(experiment_seed, sample_seed, substream, counter, dimension) -> np.ndarray:
    """Vectorized uniform(0,1) draws."""
    w = word_array(experiment_seed, sample_seed, substream, counter, dimension)
    return ((w >> np.uint64(12)).astype(np.float64) + 0.5) * _TO_UNIT


def gamma21_array(experiment_seed, sample_seed, substream, counter, dimension) -> np.ndarray:
    """Vectorized Gamma(2,1) draws at logical counter ``counter``."""
    c = np.asarray(counter, dtype=np.int64)
    u1 = units_array(experiment_seed, sample_seed, substream, 2 * c, dimension)
    u2 = units_array(experiment_seed, sample_seed, substream, 2 * c + 1, dimension)
    return -(np.log(u1) + np.log(u2))


def gaussian_array(experiment_seed, sample_seed, substream, counter, dimension) -> np.ndarray:
    """Vectorized standard normals at logical counter ``counter``."""
    c = np.asarray(counter, dtype=np.int64)
    u1 = units_array(experiment_seed, sample_seed, substream, 2 * c, dimension)
    u2 = units_array(experiment_seed, sample_seed, substream, 2 * c + 1, dimension)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
