"""The three hashing families over sparse vectors.

* ``cws_sample`` draws the (i*, t*) tuple of the p-powered consistent
  weighted sampler: collisions of the full tuple estimate the p-powered
  min-max kernel, collisions of i* alone approximate it closely.
* ``minhash`` takes the minimum keyed word over the support, a surrogate for
  a random permutation; collisions estimate binary Jaccard.
* ``signrp`` is the sign of a gaussian random projection; collisions follow
  the 1 - angle/pi law.

All draws come from the keyed streams in :mod:`kcohort.rng`, so any two
vectors observe identical randomness on shared dimensions — the consistency
property that makes the collision laws hold.  Everything here is a pure
function of its arguments; batch entry points are vectorized but bit-equal
to the scalar ones.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import UndefinedHashError
from .vectors import Dataset, SparseVector

CWS_BITS_ZERO = "zero"
CWS_BITS_FULL = "full"

_U32_MASK = np.uint64(0xFFFFFFFF)


@dataclass(frozen=True)
class CwsSample:
    """Output tuple of one consistent weighted sample."""

    istar: int
    tstar: int


@dataclass(frozen=True)
class HashMethod:
    """Which hashing family to run, plus its parameters."""

    kind: str               # "cws" | "minhash" | "signrp"
    p: float = 1.0          # cws only
    cws_bits: str = CWS_BITS_ZERO

    def __post_init__(self):
        if self.kind not in ("cws", "minhash", "signrp"):
            raise ValueError(f"unknown hash method {self.kind!r}")
        if self.p <= 0:
            raise ValueError("p must be positive")
        if self.cws_bits not in (CWS_BITS_ZERO, CWS_BITS_FULL):
            raise ValueError(f"cws_bits must be 'zero' or 'full', got {self.cws_bits!r}")

    @classmethod
    def cws(cls, p: float = 1.0, bits: str = CWS_BITS_ZERO) -> "HashMethod":
        return cls("cws", p=p, cws_bits=bits)

    @classmethod
    def minhash(cls) -> "HashMethod":
        return cls("minhash")

    @classmethod
    def signrp(cls) -> "HashMethod":
        return cls("signrp")

    @property
    def label(self) -> str:
        if self.kind == "cws":
            return f"cws(p={self.p:g},bits={self.cws_bits})"
        return self.kind


@dataclass(frozen=True, eq=False)
class HashVector:
    """m hash words for one user; lexicographic order is the sort order."""

    values: np.ndarray  # uint64, shape (m,)

    def __len__(self) -> int:
        return int(self.values.size)

    def __getitem__(self, k: int) -> int:
        return int(self.values[k])

    def __eq__(self, other) -> bool:
        if not isinstance(other, HashVector):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    def hex_words(self) -> list[str]:
        """Big-endian hex, 16 digits per word."""
        return [f"{int(w):016x}" for w in self.values]


def _require_nonempty(u: SparseVector) -> None:
    if u.nnz == 0:
        raise UndefinedHashError("hash of an empty vector is undefined")


# --- consistent weighted sampling -------------------------------------------


def cws_draws(dims, sample_seed, experiment_seed):
    """Per-dimension draws (r, c, beta) of the weighted sampler.

    ``dims`` may carry any broadcastable shape; ``sample_seed`` likewise.
    The draws depend only on (experiment_seed, sample_seed, dimension), never
    on the vector, which is what makes the sampling consistent.
    """
    r = rng.gamma21_array(experiment_seed, sample_seed, rng.SUBSTREAM_GAMMA_R, 0, dims)
    c = rng.gamma21_array(experiment_seed, sample_seed, rng.SUBSTREAM_GAMMA_C, 0, dims)
    beta = rng.units_array(experiment_seed, sample_seed, rng.SUBSTREAM_BETA, 0, dims)
    return r, c, beta


def _cws_tables(base_dims, p, sample_seed, experiment_seed):
    """Per-dimension score tables (r, p/r, beta, lnc - r*(1 - beta)).

    The last table folds every t-independent term of the score, so the
    per-entry work is two fused multiply-adds and a floor.
    """
    r, c, beta = cws_draws(base_dims, sample_seed, experiment_seed)
    s1 = np.log(c) - r * (1.0 - beta)
    return r, p / r, beta, s1


def _cws_t_a(log_w, idx, tables):
    """(t, a) for entries with log weights and table positions ``idx``."""
    r, pr, beta, s1 = tables
    t = np.floor(log_w * pr[idx] + beta[idx])
    a = s1[idx] - r[idx] * t
    return t, a


def _cws_scores_flat(dims, log_w, d, p, sample_seed, experiment_seed):
    """(t, a) per entry of a flat (dims, log weight) stream.

    Draw tables are built per distinct dimension (or densely once the stream
    is longer than d) and gathered, so repeated dimensions across users in
    the same batch cost O(1) each.
    """
    if dims.size >= d:
        tables = _cws_tables(np.arange(d, dtype=np.int64), p, sample_seed, experiment_seed)
        return _cws_t_a(log_w, dims, tables)
    udims, inv = np.unique(dims, return_inverse=True)
    tables = _cws_tables(udims, p, sample_seed, experiment_seed)
    return _cws_t_a(log_w, inv, tables)


def _segment_first_argmin(values: np.ndarray, indptr: np.ndarray) -> np.ndarray:
    """First position of each segment's minimum (segments must be nonempty)."""
    counts = np.diff(indptr)
    mins = np.minimum.reduceat(values, indptr[:-1])
    candidates = np.where(values == np.repeat(mins, counts),
                          np.arange(values.size), values.size)
    return np.minimum.reduceat(candidates, indptr[:-1])


def cws_sample(u: SparseVector, p: float, sample_seed: int, experiment_seed: int) -> CwsSample:
    """One (i*, t*) sample of the p-powered consistent weighted sampler.

    For every support dimension: r, c ~ Gamma(2,1) and beta ~ Uniform(0,1)
    from the keyed streams, then t_i = floor(p*ln(u_i)/r_i + beta_i) and
    a_i = ln(c_i) - r_i*(t_i + 1 - beta_i); the output is the argmin of a
    (ties broken toward the smallest dimension) with its t value.
    """
    _require_nonempty(u)
    if p <= 0:
        raise ValueError("p must be positive")
    t, a = _cws_scores_flat(u.dims, np.log(u.weights), u.d, p, sample_seed, experiment_seed)
    pos = int(np.argmin(a))
    return CwsSample(istar=int(u.dims[pos]), tstar=int(t[pos]))


def cws_zero_bit(u: SparseVector, p: float, sample_seed: int, experiment_seed: int) -> int:
    """The i* component only (the 0-bit form used for cohort splitting)."""
    return cws_sample(u, p, sample_seed, experiment_seed).istar


def cws_samples_for_seeds(u: SparseVector, p: float, seeds, experiment_seed: int):
    """(i*, t*) arrays across many sample seeds, vectorized.

    Equivalent to calling :func:`cws_sample` once per seed.
    """
    _require_nonempty(u)
    seeds = np.asarray(seeds, dtype=np.int64).reshape(-1, 1)
    r, c, beta = cws_draws(u.dims[None, :], seeds, experiment_seed)
    log_w = np.log(u.weights)[None, :]
    t = np.floor(log_w * (p / r) + beta)
    a = (np.log(c) - r * (1.0 - beta)) - r * t
    pos = np.argmin(a, axis=1)
    rows = np.arange(seeds.size)
    return u.dims[pos].astype(np.int64), t[rows, pos].astype(np.int64)


def fold_cws_word(istar, tstar) -> np.ndarray:
    """Pack (i*, t*) injectively into one 64-bit word (avalanche-mixed)."""
    packed = (np.asarray(istar).astype(np.uint64) << np.uint64(32)) \
        | (np.asarray(tstar).astype(np.int64).view(np.uint64) & _U32_MASK)
    return rng._mix64_array(packed)


# --- minhash and sign random projections ------------------------------------


def minhash(u: SparseVector, sample_seed: int, experiment_seed: int) -> int:
    """Minimum keyed word over the support (weights ignored)."""
    _require_nonempty(u)
    words = rng.word_array(experiment_seed, sample_seed, rng.SUBSTREAM_PERMUTATION, 0, u.dims)
    return int(words.min())


def _segment_sums(products: np.ndarray, indptr: np.ndarray) -> np.ndarray:
    # One summation algorithm everywhere, so the scalar, per-vector, and
    # whole-dataset sign paths agree bit-for-bit even when a sum is ~0.
    return np.add.reduceat(products, indptr[:-1])


def signrp_raw(dims, weights, sample_seed: int, experiment_seed: int) -> int:
    """Sign bit of a gaussian projection of an arbitrary-signed vector."""
    dims = np.asarray(dims, dtype=np.int64)
    if dims.size == 0:
        raise UndefinedHashError("hash of an empty vector is undefined")
    g = rng.gaussian_array(experiment_seed, sample_seed, rng.SUBSTREAM_PROJECTION, 0, dims)
    products = np.asarray(weights, dtype=np.float64) * g
    total = float(_segment_sums(products, np.array([0, dims.size]))[0])
    return 1 if total >= 0 else 0


def signrp(u: SparseVector, sample_seed: int, experiment_seed: int) -> int:
    """Sign of the gaussian projection, evaluated lazily on the support."""
    _require_nonempty(u)
    return signrp_raw(u.dims, u.weights, sample_seed, experiment_seed)


# --- m-sample vector and whole-dataset forms --------------------------------


def hash_vector(u: SparseVector, method: HashMethod, m: int, experiment_seed: int) -> HashVector:
    """m hash words for one user, at sample seeds 0..m-1.

    Consistent weighted samples contribute i* only unless the method asks
    for full (i*, t*) words; sign bits are kept one per word so every family
    sorts the same way.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    _require_nonempty(u)
    seeds = np.arange(m, dtype=np.int64)
    if method.kind == "cws":
        istar, tstar = cws_samples_for_seeds(u, method.p, seeds, experiment_seed)
        if method.cws_bits == CWS_BITS_FULL:
            values = fold_cws_word(istar, tstar)
        else:
            values = istar.astype(np.uint64)
        return HashVector(values)
    if method.kind == "minhash":
        words = rng.word_array(experiment_seed, seeds[:, None],
                               rng.SUBSTREAM_PERMUTATION, 0, u.dims[None, :])
        return HashVector(words.min(axis=1))
    g = rng.gaussian_array(experiment_seed, seeds[:, None],
                           rng.SUBSTREAM_PROJECTION, 0, u.dims[None, :])
    products = (g * u.weights[None, :]).reshape(-1)
    grid_indptr = np.arange(m + 1, dtype=np.int64) * u.nnz
    bits = (_segment_sums(products, grid_indptr) >= 0.0).astype(np.uint64)
    return HashVector(bits)


def _check_nonempty_rows(dataset: Dataset, rows: np.ndarray, counts: np.ndarray) -> None:
    if np.any(counts == 0):
        bad = dataset.user_ids[int(rows[np.argmax(counts == 0)])]
        raise UndefinedHashError(f"user {bad!r} has an empty vector")


def _flat_positions(dataset: Dataset, rows: np.ndarray, counts: np.ndarray,
                    local_indptr: np.ndarray) -> np.ndarray:
    """Entry positions of ``rows`` concatenated, in row order."""
    if rows.size and rows[-1] - rows[0] == rows.size - 1:
        # contiguous row range: the entries are one CSR slice
        return np.arange(dataset.indptr[rows[0]], dataset.indptr[rows[-1] + 1],
                         dtype=np.int64)
    return np.arange(local_indptr[-1], dtype=np.int64) \
        - np.repeat(local_indptr[:-1], counts) \
        + np.repeat(dataset.indptr[rows], counts)


def _flat_rows(dataset: Dataset, rows: np.ndarray):
    """Concatenated entry stream for a subset of users.

    Returns (flat positions, local indptr); raises if any row is empty.
    """
    counts = dataset.indptr[rows + 1] - dataset.indptr[rows]
    _check_nonempty_rows(dataset, rows, counts)
    local_indptr = np.zeros(rows.size + 1, dtype=np.int64)
    np.cumsum(counts, out=local_indptr[1:])
    return _flat_positions(dataset, rows, counts, local_indptr), local_indptr


# Entries processed per block in the splitter's inner loop.  Small enough
# that a block's working set stays cache-resident, which keeps the per-entry
# cost flat as populations grow.
_CWS_BLOCK_ENTRIES = 1 << 18


def cws_istars_for_rows(dataset: Dataset, rows: np.ndarray, p: float,
                        sample_seed: int, experiment_seed: int,
                        log_importance: np.ndarray | None = None) -> np.ndarray:
    """0-bit samples for a set of users under one shared sample seed.

    This is the inner step of the consecutive splitter: one pass over the
    members' support entries, O(total support size).  An optional
    per-dimension log importance is added to the log weights, implementing
    importance-weighted hashing without touching the stored vectors.
    """
    counts = dataset.indptr[rows + 1] - dataset.indptr[rows]
    _check_nonempty_rows(dataset, rows, counts)
    total = int(counts.sum())
    if total < dataset.d:
        # small member set: one pass over tables keyed by the distinct dims
        local_indptr = np.zeros(rows.size + 1, dtype=np.int64)
        np.cumsum(counts, out=local_indptr[1:])
        flat = _flat_positions(dataset, rows, counts, local_indptr)
        dims = dataset.indices[flat]
        log_w = dataset.log_weights[flat]
        if log_importance is not None:
            log_w = log_w + log_importance[dims]
        _, a = _cws_scores_flat(dims, log_w, dataset.d, p, sample_seed, experiment_seed)
        first = _segment_first_argmin(a, local_indptr)
        return dims[first]

    # large member set: dense per-dimension tables, entries in cache-sized
    # blocks split at row boundaries
    tables = _cws_tables(np.arange(dataset.d, dtype=np.int64), p,
                         sample_seed, experiment_seed)
    out = np.empty(rows.size, dtype=np.int64)
    entry_ends = np.cumsum(counts)
    row_start = 0
    while row_start < rows.size:
        base = entry_ends[row_start - 1] if row_start else 0
        row_end = int(np.searchsorted(entry_ends, base + _CWS_BLOCK_ENTRIES,
                                      side="left")) + 1
        row_end = min(row_end, rows.size)
        block_rows = rows[row_start:row_end]
        block_counts = counts[row_start:row_end]
        local_indptr = np.zeros(block_rows.size + 1, dtype=np.int64)
        np.cumsum(block_counts, out=local_indptr[1:])
        flat = _flat_positions(dataset, block_rows, block_counts, local_indptr)
        dims = dataset.indices[flat]
        log_w = dataset.log_weights[flat]
        if log_importance is not None:
            log_w = log_w + log_importance[dims]
        _, a = _cws_t_a(log_w, dims, tables)
        first = _segment_first_argmin(a, local_indptr)
        out[row_start:row_end] = dims[first]
        row_start = row_end
    return out


def hash_matrix(dataset: Dataset, method: HashMethod, m: int, experiment_seed: int,
                threads: int = 1) -> np.ndarray:
    """(n, m) matrix of hash words, column k at sample seed k.

    Columns are independent pure functions, so they may be computed on a
    thread pool; the result is identical for any thread count.  ``threads``
    of 0 means one worker per core.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    rows = np.arange(dataset.n, dtype=np.int64)
    flat, local_indptr = _flat_rows(dataset, rows)
    dims = dataset.indices[flat]
    out = np.empty((dataset.n, m), dtype=np.uint64)
    if method.kind == "cws":
        log_w = dataset.log_weights[flat]

        def column(k: int) -> None:
            t, a = _cws_scores_flat(dims, log_w, dataset.d, method.p, k, experiment_seed)
            first = _segment_first_argmin(a, local_indptr)
            if method.cws_bits == CWS_BITS_FULL:
                out[:, k] = fold_cws_word(dims[first], t[first].astype(np.int64))
            else:
                out[:, k] = dims[first].astype(np.uint64)
    elif method.kind == "minhash":

        def column(k: int) -> None:
            words = rng.word_array(experiment_seed, k, rng.SUBSTREAM_PERMUTATION, 0, dims)
            out[:, k] = np.minimum.reduceat(words, local_indptr[:-1])
    else:
        weights = dataset.weights[flat]

        def column(k: int) -> None:
            g = rng.gaussian_array(experiment_seed, k, rng.SUBSTREAM_PROJECTION, 0, dims)
            sums = _segment_sums(weights * g, local_indptr)
            out[:, k] = (sums >= 0.0).astype(np.uint64)

    workers = threads if threads >= 1 else (os.cpu_count() or 1)
    if workers == 1 or m == 1:
        for k in range(m):
            column(k)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(column, range(m)))
    return out
