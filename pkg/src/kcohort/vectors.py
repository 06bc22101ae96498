"""Sparse non-negative vectors, exact similarity kernels, and dataset I/O.

Vectors are stored as parallel (dimension, weight) arrays with strictly
ascending dimensions and strictly positive finite weights; datasets hold all
users in one CSR block so the samplers can stream over row slices.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import DatasetFormatError, UndefinedSimilarityError


@dataclass(frozen=True, eq=False)
class SparseVector:
    """One user's feature vector: ascending dimensions, positive weights."""

    dims: np.ndarray
    weights: np.ndarray
    d: int

    def __post_init__(self):
        dims = np.asarray(self.dims, dtype=np.int64)
        weights = np.asarray(self.weights, dtype=np.float64)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "weights", weights)
        if dims.shape != weights.shape or dims.ndim != 1:
            raise ValueError("dims and weights must be parallel 1-d arrays")
        if dims.size > self.d:
            raise ValueError("more entries than dimensions")
        if dims.size:
            if dims[0] < 0 or dims[-1] >= self.d:
                raise ValueError("dimension index out of range")
            if np.any(np.diff(dims) <= 0):
                raise ValueError("dimensions must be strictly ascending")
            if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
                raise ValueError("weights must be positive and finite")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, float]], d: int) -> "SparseVector":
        pairs = sorted(pairs)
        dims = np.array([p[0] for p in pairs], dtype=np.int64)
        weights = np.array([p[1] for p in pairs], dtype=np.float64)
        return cls(dims, weights, d)

    @property
    def nnz(self) -> int:
        return int(self.dims.size)

    def get(self, dim: int) -> float:
        """Weight at ``dim`` (0.0 when absent)."""
        pos = np.searchsorted(self.dims, dim)
        if pos < self.dims.size and self.dims[pos] == dim:
            return float(self.weights[pos])
        return 0.0

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.d, dtype=np.float64)
        dense[self.dims] = self.weights
        return dense

    def scale(self, c: float) -> "SparseVector":
        return SparseVector(self.dims, self.weights * c, self.d)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseVector):
            return NotImplemented
        return (
            self.d == other.d
            and np.array_equal(self.dims, other.dims)
            and np.array_equal(self.weights, other.weights)
        )

    def __repr__(self) -> str:
        entries = ", ".join(f"{i}:{w:g}" for i, w in zip(self.dims[:4], self.weights[:4]))
        tail = ", ..." if self.nnz > 4 else ""
        return f"SparseVector({{{entries}{tail}}}, d={self.d})"


def _merged_dense(x: SparseVector, y: SparseVector) -> tuple[np.ndarray, np.ndarray]:
    """Align two vectors on the union of their supports."""
    union = np.union1d(x.dims, y.dims)
    xs = np.zeros(union.size)
    ys = np.zeros(union.size)
    xs[np.searchsorted(union, x.dims)] = x.weights
    ys[np.searchsorted(union, y.dims)] = y.weights
    return xs, ys


def _check_pair(x: SparseVector, y: SparseVector) -> None:
    if x.d != y.d:
        raise ValueError(f"dimensionality mismatch: {x.d} != {y.d}")
    if x.nnz == 0 and y.nnz == 0:
        raise UndefinedSimilarityError("similarity of two empty vectors is undefined")


def weighted_jaccard(x: SparseVector, y: SparseVector) -> float:
    """Sum of coordinatewise minima over sum of maxima."""
    _check_pair(x, y)
    xs, ys = _merged_dense(x, y)
    return float(np.minimum(xs, ys).sum() / np.maximum(xs, ys).sum())


def pgmm(x: SparseVector, y: SparseVector, p: float) -> float:
    """The p-powered min-max kernel; equals weighted_jaccard at p = 1."""
    if p <= 0:
        raise ValueError("p must be positive")
    _check_pair(x, y)
    xs, ys = _merged_dense(x, y)
    mins = np.minimum(xs, ys)
    maxs = np.maximum(xs, ys)
    if p == 1.0:
        return float(mins.sum() / maxs.sum())
    if p == 2.0:
        return float((mins * mins).sum() / (maxs * maxs).sum())
    return float((mins ** p).sum() / (maxs ** p).sum())


def binary_jaccard(x: SparseVector, y: SparseVector) -> float:
    """Set Jaccard over the supports; weights are ignored."""
    _check_pair(x, y)
    inter = np.intersect1d(x.dims, y.dims, assume_unique=True).size
    union = x.nnz + y.nnz - inter
    return inter / union


def double_dimensions(dims: Sequence[int], weights: Sequence[float], d: int) -> SparseVector:
    """Map a signed sparse vector onto 2d non-negative dimensions.

    A positive entry w at dimension i stays at i; a negative entry moves to
    d + i with weight -w; zeros are dropped.
    """
    dims = np.asarray(dims, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    if dims.size and (dims[0] < 0 or dims[-1] >= d or np.any(np.diff(dims) <= 0)):
        raise ValueError("dimensions must be strictly ascending and within [0, d)")
    if not np.all(np.isfinite(weights)):
        raise ValueError("weights must be finite")
    pos = weights > 0
    neg = weights < 0
    out_dims = np.concatenate([dims[pos], dims[neg] + d])
    out_weights = np.concatenate([weights[pos], -weights[neg]])
    return SparseVector(out_dims, out_weights, 2 * d)


class Dataset:
    """All users of one experiment, stored as a CSR block.

    Parameters are taken as already validated; use :meth:`from_vectors` or
    :func:`load_dataset` to construct safely.
    """

    def __init__(self, user_ids: list[str], indptr: np.ndarray, indices: np.ndarray,
                 weights: np.ndarray, d: int):
        self.user_ids = user_ids
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.weights = np.asarray(weights, dtype=np.float64)
        self.d = d
        self._row_of: dict[str, int] | None = None
        self._log_weights: np.ndarray | None = None

    @classmethod
    def from_vectors(cls, users: Iterable[tuple[str, SparseVector]], d: int | None = None) -> "Dataset":
        user_ids: list[str] = []
        dim_parts: list[np.ndarray] = []
        w_parts: list[np.ndarray] = []
        counts: list[int] = []
        for uid, vec in users:
            if d is None:
                d = vec.d
            elif vec.d != d:
                raise ValueError(f"user {uid!r}: dimensionality {vec.d} != {d}")
            user_ids.append(uid)
            dim_parts.append(vec.dims)
            w_parts.append(vec.weights)
            counts.append(vec.nnz)
        if len(set(user_ids)) != len(user_ids):
            raise ValueError("duplicate user_id")
        indptr = np.zeros(len(user_ids) + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        indices = np.concatenate(dim_parts) if dim_parts else np.empty(0, dtype=np.int64)
        weights = np.concatenate(w_parts) if w_parts else np.empty(0, dtype=np.float64)
        return cls(user_ids, indptr, indices, weights, d if d is not None else 0)

    @property
    def n(self) -> int:
        return len(self.user_ids)

    def __len__(self) -> int:
        return self.n

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """(dims, weights) views of user i."""
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.weights[lo:hi]

    def vector(self, i: int) -> SparseVector:
        dims, weights = self.row(i)
        return SparseVector(dims.copy(), weights.copy(), self.d)

    def iter_users(self) -> Iterator[tuple[str, SparseVector]]:
        for i, uid in enumerate(self.user_ids):
            yield uid, self.vector(i)

    def index_of(self, user_id: str) -> int:
        if self._row_of is None:
            self._row_of = {uid: i for i, uid in enumerate(self.user_ids)}
        return self._row_of[user_id]

    @property
    def log_weights(self) -> np.ndarray:
        if self._log_weights is None:
            self._log_weights = np.log(self.weights)
        return self._log_weights

    def row_sizes(self) -> np.ndarray:
        return np.diff(self.indptr)


def _format_weight(w: float) -> str:
    return repr(float(w))


def store_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write the tab-separated dataset format (see load_dataset)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(f"#d {dataset.d}\n")
        for i, uid in enumerate(dataset.user_ids):
            dims, weights = dataset.row(i)
            entries = " ".join(f"{dim}:{_format_weight(w)}" for dim, w in zip(dims, weights))
            fh.write(f"{uid}\t{entries}\n" if entries else f"{uid}\n")


def load_dataset(path: str | Path) -> Dataset:
    """Parse a dataset file.

    Format: a ``#d <dimensionality>`` header, then one user per line as
    ``user_id<TAB>idx:weight idx:weight ...`` with indices strictly ascending
    and weights positive decimals.  Blank lines and ``#`` comments are
    ignored.  Violations raise :class:`DatasetFormatError` naming the line.
    """
    path = Path(path)
    d: int | None = None
    user_ids: list[str] = []
    seen: set[str] = set()
    dim_parts: list[np.ndarray] = []
    w_parts: list[np.ndarray] = []
    counts: list[int] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if d is None:
                stripped = line.strip()
                if not stripped:
                    continue
                if not stripped.startswith("#d "):
                    raise DatasetFormatError("expected '#d <dimensionality>' header", lineno)
                try:
                    d = int(stripped[3:].strip())
                except ValueError:
                    raise DatasetFormatError("bad dimensionality in header", lineno) from None
                if d <= 0:
                    raise DatasetFormatError("dimensionality must be positive", lineno)
                continue
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            uid, _, rest = line.partition("\t")
            uid = uid.strip()
            if not uid:
                raise DatasetFormatError("empty user_id", lineno)
            if uid in seen:
                raise DatasetFormatError(f"duplicate user_id {uid!r}", lineno)
            seen.add(uid)
            dims: list[int] = []
            weights: list[float] = []
            prev = -1
            for token in rest.split():
                idx_str, sep, w_str = token.partition(":")
                if not sep:
                    raise DatasetFormatError(f"malformed entry {token!r}", lineno)
                try:
                    idx = int(idx_str)
                except ValueError:
                    raise DatasetFormatError(f"bad index {idx_str!r}", lineno) from None
                try:
                    w = float(w_str)
                except ValueError:
                    raise DatasetFormatError(f"bad weight {w_str!r}", lineno) from None
                if idx < 0 or idx >= d:
                    raise DatasetFormatError(f"index {idx} outside [0, {d})", lineno)
                if idx <= prev:
                    raise DatasetFormatError("indices must be strictly ascending", lineno)
                if not np.isfinite(w) or w <= 0:
                    raise DatasetFormatError(f"weight must be positive and finite, got {w_str}", lineno)
                prev = idx
                dims.append(idx)
                weights.append(w)
            user_ids.append(uid)
            dim_parts.append(np.array(dims, dtype=np.int64))
            w_parts.append(np.array(weights, dtype=np.float64))
            counts.append(len(dims))
    if d is None:
        raise DatasetFormatError("missing '#d <dimensionality>' header", 1)
    indptr = np.zeros(len(user_ids) + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    indices = np.concatenate(dim_parts) if dim_parts else np.empty(0, dtype=np.int64)
    weights_arr = np.concatenate(w_parts) if w_parts else np.empty(0, dtype=np.float64)
    return Dataset(user_ids, indptr, indices, weights_arr, d)
