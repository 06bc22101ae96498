"""Shared fixtures, oracle helpers, and the acceptance report hook."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from kcohort import Dataset, SparseVector

REPO_ROOT = Path(__file__).resolve().parents[1]

# One line per acceptance criterion, echoed in the terminal summary.
ACCEPTANCE_RESULTS: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def repo_root() -> Path:
    return REPO_ROOT


def sv(pairs, d) -> SparseVector:
    return SparseVector.from_pairs(pairs, d)


def dense_weighted_jaccard(x: SparseVector, y: SparseVector) -> float:
    """Brute-force oracle on densified vectors."""
    a, b = x.to_dense(), y.to_dense()
    return np.minimum(a, b).sum() / np.maximum(a, b).sum()


def dense_pgmm(x: SparseVector, y: SparseVector, p: float) -> float:
    a, b = x.to_dense(), y.to_dense()
    return (np.minimum(a, b) ** p).sum() / (np.maximum(a, b) ** p).sum()


def dense_binary_jaccard(x: SparseVector, y: SparseVector) -> float:
    a, b = x.to_dense() > 0, y.to_dense() > 0
    return (a & b).sum() / (a | b).sum()


def angle_between(x: SparseVector, y: SparseVector) -> float:
    a, b = x.to_dense(), y.to_dense()
    cos = np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b))
    return float(np.arccos(np.clip(cos, -1.0, 1.0)))


def make_dataset(vectors: list[SparseVector], prefix: str = "u") -> Dataset:
    d = vectors[0].d
    return Dataset.from_vectors(
        [(f"{prefix}{i:04d}", v) for i, v in enumerate(vectors)], d)
