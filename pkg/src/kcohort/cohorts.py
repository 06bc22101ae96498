"""Cohort builders, the K-anonymity check, and assignment files.

The consecutive splitter starts from one cohort holding everyone and, each
iteration, splits any cohort of at least 2K members on its most frequent
0-bit weighted-sample value — but only when both sides keep at least K
members, so the anonymity bound holds at every step by construction.  The
hash-and-sort builders sort users by their hash vectors and cut consecutive
groups of K; random grouping is the naive baseline.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from . import rng
from .errors import DatasetFormatError, InfeasibilityError
from .hashers import HashMethod, cws_istars_for_rows, hash_matrix
from .vectors import Dataset, SparseVector

# A cohort that produced no split may still split under a later seed, so an
# all-quiet iteration is not proof of convergence.  Give up only after this
# many consecutive splitless iterations.
SPLITLESS_PATIENCE = 32


def cohort_digest(member_ids: Iterable[str]) -> str:
    """SHA-256 over the sorted member ids joined by 0x0A, hex-encoded."""
    payload = b"\n".join(uid.encode("utf-8") for uid in sorted(member_ids))
    return hashlib.sha256(payload).hexdigest()


@dataclass(frozen=True)
class Cohort:
    id: str                       # 32-byte digest, hex
    members: tuple[str, ...]      # sorted user_ids
    identity: SparseVector | None = None

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass
class CohortAssignment:
    """A finalized partition of the users into cohorts."""

    cohorts: list[Cohort]
    method: str
    params: dict[str, object] = field(default_factory=dict)
    iterations_used: int = 0

    def sizes(self) -> np.ndarray:
        return np.array([c.size for c in self.cohorts], dtype=np.int64)

    def user_to_cohort(self) -> dict[str, str]:
        mapping: dict[str, str] = {}
        for cohort in self.cohorts:
            for uid in cohort.members:
                mapping[uid] = cohort.id
        return mapping

    @property
    def n_users(self) -> int:
        return int(sum(c.size for c in self.cohorts))


def _finalize(dataset: Dataset, groups: list[np.ndarray], method: str,
              params: dict[str, object], iterations_used: int) -> CohortAssignment:
    cohorts = []
    for rows in groups:
        members = tuple(sorted(dataset.user_ids[i] for i in rows))
        cohorts.append(Cohort(id=cohort_digest(members), members=members))
    return CohortAssignment(cohorts=cohorts, method=method, params=params,
                            iterations_used=iterations_used)


def _check_feasible(dataset: Dataset, k: int) -> None:
    if k < 1:
        raise ValueError("K must be >= 1")
    if dataset.n < k:
        raise InfeasibilityError(f"{dataset.n} users cannot satisfy K={k}")


def build_ccws(dataset: Dataset, p: float = 1.0, T: int = 1000, K: int = 20,
               experiment_seed: int = 42,
               importance: np.ndarray | None = None) -> CohortAssignment:
    """Consecutive splitting on the most frequent weighted-sample value.

    Per iteration, every cohort with at least 2K members draws one fresh
    sample seed (keyed by iteration and the cohort's creation ordinal),
    hashes each member with the 0-bit sampler, and peels off the users on
    the most frequent value when both parts keep K members.  Stops after T
    iterations, or earlier once nothing can split any more.

    ``importance`` optionally rescales every vector elementwise (positive
    entries, length d) before hashing, to emphasize chosen features.
    """
    _check_feasible(dataset, K)
    if T < 1:
        raise ValueError("T must be >= 1")
    if p <= 0:
        raise ValueError("p must be positive")
    log_importance = None
    if importance is not None:
        importance = np.asarray(importance, dtype=np.float64)
        if importance.shape != (dataset.d,):
            raise ValueError("importance must have one entry per dimension")
        if not np.all(np.isfinite(importance)) or np.any(importance <= 0):
            raise ValueError("importance entries must be positive and finite")
        log_importance = np.log(importance)

    # (rows, creation ordinal, frozen) per live cohort, in creation order.
    groups: list[np.ndarray] = [np.arange(dataset.n, dtype=np.int64)]
    ordinals: list[int] = [0]
    frozen: list[bool] = [dataset.n < 2 * K]
    next_ordinal = 1
    splitless_streak = 0
    iterations_used = 0

    for t in range(1, T + 1):
        if all(frozen):
            break
        iterations_used = t
        split_happened = False
        new_groups: list[np.ndarray] = []
        new_ordinals: list[int] = []
        new_frozen: list[bool] = []
        for rows, ordinal, is_frozen in zip(groups, ordinals, frozen):
            if is_frozen or rows.size < 2 * K:
                new_groups.append(rows)
                new_ordinals.append(ordinal)
                new_frozen.append(True)
                continue
            sample_seed = rng.raw_word(
                rng.StreamKey(experiment_seed, t, ordinal, rng.SUBSTREAM_SPLIT_SEED), 0)
            istars = cws_istars_for_rows(dataset, rows, p, sample_seed,
                                         experiment_seed, log_importance)
            values, counts = np.unique(istars, return_counts=True)
            top = int(np.argmax(counts))  # ties: first = smallest hash value
            max_value, max_count = int(values[top]), int(counts[top])
            if max_count >= K and rows.size - max_count >= K:
                mask = istars == max_value
                peeled, rest = rows[mask], rows[~mask]
                assert peeled.size >= K and rest.size >= K, "split violated anonymity"
                new_groups.extend([peeled, rest])
                new_ordinals.extend([next_ordinal, next_ordinal + 1])
                next_ordinal += 2
                new_frozen.extend([peeled.size < 2 * K, rest.size < 2 * K])
                split_happened = True
            else:
                new_groups.append(rows)
                new_ordinals.append(ordinal)
                new_frozen.append(False)
        groups, ordinals, frozen = new_groups, new_ordinals, new_frozen
        if split_happened:
            splitless_streak = 0
        else:
            splitless_streak += 1
            if splitless_streak >= SPLITLESS_PATIENCE:
                break

    params = {"k": K, "t": T, "p": p, "m": 0, "experiment_seed": experiment_seed}
    return _finalize(dataset, groups, "ccws", params, iterations_used)


def build_hash_and_sort(dataset: Dataset, method: HashMethod, m: int = 75,
                        K: int = 20, experiment_seed: int = 42,
                        threads: int = 1) -> CohortAssignment:
    """Sort users by their hash vectors, cut consecutive groups of K.

    Ties are broken by user_id so the output is deterministic; a trailing
    remainder of fewer than K users is merged into the last cohort.
    """
    _check_feasible(dataset, K)
    matrix = hash_matrix(dataset, method, m, experiment_seed, threads=threads)
    ids = np.array(dataset.user_ids)
    keys = (ids,) + tuple(matrix[:, j] for j in range(m - 1, -1, -1))
    order = np.lexsort(keys)
    n = dataset.n
    full = n // K
    groups = [order[i * K:(i + 1) * K] for i in range(full - 1)]
    groups.append(order[(full - 1) * K:])  # last cohort absorbs the remainder
    params = {"k": K, "t": 0, "p": method.p if method.kind == "cws" else 0.0,
              "m": m, "experiment_seed": experiment_seed}
    return _finalize(dataset, groups, f"{method.kind}-sort", params, 0)


def build_random(dataset: Dataset, K: int = 20, experiment_seed: int = 42) -> CohortAssignment:
    """Uniform random grouping into about n/(2K) buckets.

    Buckets that land below K are merged round-robin into the viable ones.
    """
    _check_feasible(dataset, K)
    n = dataset.n
    n_buckets = max(1, n // (2 * K))
    words = rng.word_array(experiment_seed, 0, rng.SUBSTREAM_BUCKET, 0,
                           np.arange(n, dtype=np.int64))
    bucket_of = (words % np.uint64(n_buckets)).astype(np.int64)
    buckets = [np.flatnonzero(bucket_of == b) for b in range(n_buckets)]
    viable = [b for b in buckets if b.size >= K]
    small = [b for b in buckets if b.size < K and b.size > 0]
    if not viable:
        groups = [np.concatenate(small)] if small else []
    else:
        extras: list[list[np.ndarray]] = [[] for _ in viable]
        for i, b in enumerate(small):
            extras[i % len(viable)].append(b)
        groups = [np.concatenate([b] + extra) if extra else b
                  for b, extra in zip(viable, extras)]
    params = {"k": K, "t": 0, "p": 0.0, "m": 0, "experiment_seed": experiment_seed}
    return _finalize(dataset, groups, "random", params, 0)


def cohort_identity(cohort: Cohort, dataset: Dataset) -> SparseVector:
    """Elementwise mean of the member vectors (absent entries count as zero)."""
    if not cohort.members:
        raise ValueError("cohort has no members")
    rows = [dataset.index_of(uid) for uid in cohort.members]
    dims = np.concatenate([dataset.row(i)[0] for i in rows])
    weights = np.concatenate([dataset.row(i)[1] for i in rows])
    udims, inv = np.unique(dims, return_inverse=True)
    sums = np.bincount(inv, weights=weights, minlength=udims.size)
    return SparseVector(udims, sums / len(rows), dataset.d)


@dataclass(frozen=True)
class KAnonymityReport:
    ok: bool
    violations: tuple[str, ...]          # cohort ids below K or sharing users
    missing_users: tuple[str, ...] = ()  # dataset users covered by no cohort


def verify_k_anonymity(assignment: CohortAssignment, K: int,
                       dataset: Dataset | None = None) -> KAnonymityReport:
    """Check the anonymity bound and the partition property.

    Coverage of the full user set is checked only when ``dataset`` is given;
    disjointness and the size bound are always checked.
    """
    violations: list[str] = []
    seen: dict[str, str] = {}
    for cohort in assignment.cohorts:
        if cohort.size < K:
            violations.append(cohort.id)
        for uid in cohort.members:
            if uid in seen:
                for cid in (seen[uid], cohort.id):
                    if cid not in violations:
                        violations.append(cid)
            else:
                seen[uid] = cohort.id
    missing: tuple[str, ...] = ()
    if dataset is not None:
        missing = tuple(uid for uid in dataset.user_ids if uid not in seen)
        unknown = set(seen) - set(dataset.user_ids)
        if unknown:
            for cohort in assignment.cohorts:
                if any(uid in unknown for uid in cohort.members) and cohort.id not in violations:
                    violations.append(cohort.id)
    ok = not violations and not missing
    return KAnonymityReport(ok=ok, violations=tuple(violations), missing_users=missing)


def size_distribution(assignment: CohortAssignment) -> list[tuple[int, int, float]]:
    """(size, count, cumulative fraction of cohorts), sizes ascending."""
    sizes = assignment.sizes()
    if sizes.size == 0:
        return []
    values, counts = np.unique(sizes, return_counts=True)
    cum = np.cumsum(counts) / sizes.size
    return [(int(v), int(c), float(f)) for v, c, f in zip(values, counts, cum)]


# --- assignment files --------------------------------------------------------

_META_KEYS = ("method", "k", "t", "p", "m", "experiment_seed", "iterations_used")


def write_assignment(assignment: CohortAssignment, path: str | Path) -> None:
    """One ``user_id<TAB>cohort_id_hex`` line per user, sorted by user_id."""
    pairs = sorted(assignment.user_to_cohort().items())
    with Path(path).open("w", encoding="utf-8") as fh:
        for uid, cid in pairs:
            fh.write(f"{uid}\t{cid}\n")


def write_assignment_metadata(assignment: CohortAssignment, path: str | Path) -> None:
    values = dict(assignment.params)
    values["method"] = assignment.method
    values["iterations_used"] = assignment.iterations_used
    with Path(path).open("w", encoding="utf-8") as fh:
        for key in _META_KEYS:
            fh.write(f"{key}={values.get(key, '')}\n")


def read_assignment(path: str | Path, metadata_path: str | Path | None = None) -> CohortAssignment:
    """Rebuild an assignment from its file (cohort ids are kept as stored)."""
    members_of: dict[str, list[str]] = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            uid, sep, cid = line.partition("\t")
            if not sep or not uid or not cid:
                raise DatasetFormatError("expected 'user_id<TAB>cohort_id'", lineno)
            members_of.setdefault(cid, []).append(uid)
    cohorts = [Cohort(id=cid, members=tuple(sorted(uids)))
               for cid, uids in sorted(members_of.items())]
    method = "unknown"
    params: dict[str, object] = {}
    iterations = 0
    if metadata_path is not None and Path(metadata_path).exists():
        for raw in Path(metadata_path).read_text(encoding="utf-8").splitlines():
            key, sep, value = raw.partition("=")
            if not sep:
                continue
            key = key.strip()
            value = value.strip()
            if key == "method":
                method = value
            elif key == "iterations_used":
                iterations = int(value) if value else 0
            elif key in ("k", "t", "m"):
                params[key] = int(value) if value else 0
            elif key == "p":
                params[key] = float(value) if value else 0.0
            elif key == "experiment_seed":
                params[key] = int(value) if value else 0
    return CohortAssignment(cohorts=cohorts, method=method, params=params,
                            iterations_used=iterations)
