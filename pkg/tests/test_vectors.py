"""Kernel, doubling, and dataset-format tests."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kcohort import (
    DatasetFormatError,
    SparseVector,
    UndefinedSimilarityError,
    binary_jaccard,
    double_dimensions,
    load_dataset,
    pgmm,
    store_dataset,
    weighted_jaccard,
)
from kcohort.vectors import Dataset

from conftest import dense_binary_jaccard, dense_pgmm, dense_weighted_jaccard, sv


class TestKernels:
    def test_weighted_jaccard_identity(self):
        x = sv([(0, 1.0), (3, 2.5)], 5)
        assert weighted_jaccard(x, x) == 1.0

    def test_weighted_jaccard_hand_value(self):
        x = sv([(0, 1.0), (1, 2.0)], 4)
        y = sv([(0, 2.0), (1, 1.0)], 4)
        assert weighted_jaccard(x, y) == 0.5  # (1+1)/(2+2)

    def test_weighted_jaccard_disjoint(self):
        assert weighted_jaccard(sv([(0, 1.0)], 4), sv([(2, 3.0)], 4)) == 0.0

    def test_pgmm_identity_any_p(self):
        x = sv([(1, 0.5), (2, 4.0)], 8)
        for p in (0.5, 1.0, 1.7, 2.0):
            assert pgmm(x, x, p) == 1.0

    def test_pgmm_hand_value_p2(self):
        x = sv([(0, 4.0), (1, 1.0)], 4)
        y = sv([(0, 1.0), (1, 4.0)], 4)
        assert pgmm(x, y, 2.0) == 0.0625  # (1+1)/(16+16)

    def test_pgmm_p1_equals_weighted_jaccard(self):
        x = sv([(0, 1.0), (1, 2.0)], 4)
        y = sv([(0, 2.0), (1, 1.0)], 4)
        assert pgmm(x, y, 1.0) == weighted_jaccard(x, y) == 0.5

    def test_binary_jaccard_hand_value(self):
        x = sv([(1, 9.0), (2, 1.0), (3, 2.0)], 6)
        y = sv([(2, 5.0), (3, 0.1), (4, 7.0)], 6)
        assert binary_jaccard(x, y) == 0.5  # 2 shared / 4 in union

    def test_binary_jaccard_equal_supports(self):
        x = sv([(0, 1.0), (5, 2.0)], 6)
        y = sv([(0, 9.0), (5, 0.5)], 6)
        assert binary_jaccard(x, y) == 1.0

    def test_binary_jaccard_disjoint(self):
        assert binary_jaccard(sv([(0, 1.0)], 4), sv([(1, 1.0)], 4)) == 0.0

    def test_both_empty_is_undefined(self):
        empty = SparseVector(np.array([], dtype=np.int64), np.array([]), 4)
        for kernel in (weighted_jaccard, binary_jaccard, lambda a, b: pgmm(a, b, 1.0)):
            with pytest.raises(UndefinedSimilarityError):
                kernel(empty, empty)

    def test_dimensionality_mismatch(self):
        with pytest.raises(ValueError):
            weighted_jaccard(sv([(0, 1.0)], 4), sv([(0, 1.0)], 5))

    def test_one_empty_side_is_zero(self):
        empty = SparseVector(np.array([], dtype=np.int64), np.array([]), 4)
        assert weighted_jaccard(sv([(0, 1.0)], 4), empty) == 0.0

    def test_against_dense_oracle(self):
        gen = np.random.default_rng(7)
        d = 30
        for _ in range(50):
            def draw():
                size = int(gen.integers(1, 10))
                dims = np.sort(gen.choice(d, size=size, replace=False))
                return SparseVector(dims, gen.uniform(0.1, 5.0, size=size), d)
            x, y = draw(), draw()
            assert weighted_jaccard(x, y) == pytest.approx(dense_weighted_jaccard(x, y), abs=1e-12)
            assert binary_jaccard(x, y) == pytest.approx(dense_binary_jaccard(x, y), abs=1e-12)
            for p in (0.5, 1.0, 1.3, 2.0):
                assert pgmm(x, y, p) == pytest.approx(dense_pgmm(x, y, p), rel=1e-12)


@st.composite
def sparse_vectors(draw, d=16):
    size = draw(st.integers(min_value=1, max_value=d))
    dims = draw(st.sets(st.integers(min_value=0, max_value=d - 1),
                        min_size=size, max_size=size))
    weights = draw(st.lists(st.floats(min_value=0.01, max_value=100.0,
                                      allow_nan=False, allow_infinity=False),
                            min_size=size, max_size=size))
    return SparseVector(np.sort(np.array(sorted(dims), dtype=np.int64)),
                        np.array(weights)[np.argsort(sorted(dims))], 16)


class TestKernelProperties:
    @given(sparse_vectors(), sparse_vectors())
    @settings(max_examples=150, deadline=None)
    def test_symmetry_and_bounds(self, x, y):
        for value in (weighted_jaccard(x, y), binary_jaccard(x, y), pgmm(x, y, 1.4)):
            assert 0.0 <= value <= 1.0
        assert weighted_jaccard(x, y) == weighted_jaccard(y, x)
        assert binary_jaccard(x, y) == binary_jaccard(y, x)
        assert pgmm(x, y, 0.7) == pgmm(y, x, 0.7)

    @given(sparse_vectors(), sparse_vectors())
    @settings(max_examples=150, deadline=None)
    def test_pgmm_at_one_is_weighted_jaccard(self, x, y):
        assert pgmm(x, y, 1.0) == weighted_jaccard(x, y)

    @given(sparse_vectors(), sparse_vectors(),
           st.floats(min_value=0.1, max_value=10.0),
           st.floats(min_value=0.3, max_value=3.0))
    @settings(max_examples=100, deadline=None)
    def test_pgmm_scale_covariance(self, x, y, c, p):
        scaled = pgmm(x.scale(c), y.scale(c), p)
        assert scaled == pytest.approx(pgmm(x, y, p), rel=1e-9)

    @given(sparse_vectors())
    @settings(max_examples=50, deadline=None)
    def test_self_similarity_is_one(self, x):
        assert weighted_jaccard(x, x) == 1.0
        assert binary_jaccard(x, x) == 1.0


class TestDoubling:
    def test_hand_example(self):
        doubled = double_dimensions([0, 1], [-1.0, 2.0], 2)
        assert doubled == sv([(1, 2.0), (2, 1.0)], 4)

    def test_nonnegative_input_keeps_support(self):
        doubled = double_dimensions([0, 2], [1.5, 3.0], 3)
        assert doubled == sv([(0, 1.5), (2, 3.0)], 6)

    def test_zeros_dropped(self):
        doubled = double_dimensions([0, 1, 2], [0.0, -2.0, 0.0], 3)
        assert doubled == sv([(4, 2.0)], 6)

    def test_pgmm_after_doubling(self):
        x = double_dimensions([0, 1], [-1.0, 2.0], 2)
        y = double_dimensions([0, 1], [1.0, 2.0], 2)
        assert pgmm(x, y, 1.0) == 0.5  # (0+2+0+0)/(1+2+1+0)


class TestSparseVectorValidation:
    def test_unsorted_dims_rejected(self):
        with pytest.raises(ValueError):
            SparseVector(np.array([3, 1]), np.array([1.0, 1.0]), 5)

    def test_duplicate_dims_rejected(self):
        with pytest.raises(ValueError):
            SparseVector(np.array([1, 1]), np.array([1.0, 1.0]), 5)

    def test_nonpositive_weight_rejected(self):
        for w in (0.0, -1.0, float("nan"), float("inf")):
            with pytest.raises(ValueError):
                SparseVector(np.array([1]), np.array([w]), 5)

    def test_dim_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            SparseVector(np.array([5]), np.array([1.0]), 5)

    def test_get_and_dense(self):
        x = sv([(1, 2.0), (3, 4.0)], 5)
        assert x.get(1) == 2.0 and x.get(2) == 0.0
        assert np.array_equal(x.to_dense(), [0, 2, 0, 4, 0])


class TestDatasetIO:
    def test_round_trip_identity(self, tmp_path):
        dataset = Dataset.from_vectors([
            ("alice", sv([(0, 1.0), (7, 0.125)], 10)),
            ("bob", sv([(3, 2.5)], 10)),
            ("carol", sv([(1, 0.1), (2, 0.2), (9, 33.0)], 10)),
        ], 10)
        path = tmp_path / "data.tsv"
        store_dataset(dataset, path)
        loaded = load_dataset(path)
        assert loaded.user_ids == dataset.user_ids
        assert loaded.d == dataset.d
        assert np.array_equal(loaded.indptr, dataset.indptr)
        assert np.array_equal(loaded.indices, dataset.indices)
        assert np.array_equal(loaded.weights, dataset.weights)

    def test_empty_file_with_header(self, tmp_path):
        path = tmp_path / "empty.tsv"
        path.write_text("#d 100\n")
        dataset = load_dataset(path)
        assert dataset.n == 0 and dataset.d == 100

    def test_handwritten_fixture(self, tmp_path):
        path = tmp_path / "fixture.tsv"
        path.write_text(
            "#d 8\n"
            "# a comment line\n"
            "\n"
            "u1\t0:1.5 3:2.0\n"
            "u2\t7:0.25\n"
            "u3\n")
        dataset = load_dataset(path)
        assert dataset.user_ids == ["u1", "u2", "u3"]
        assert dataset.vector(0) == sv([(0, 1.5), (3, 2.0)], 8)
        assert dataset.vector(1) == sv([(7, 0.25)], 8)
        assert dataset.vector(2).nnz == 0

    @pytest.mark.parametrize("body,fragment", [
        ("u1\t0:0\n", "weight"),
        ("u1\t0:-2\n", "weight"),
        ("u1\t0:nan\n", "weight"),
        ("u1\t3:1 1:1\n", "ascending"),
        ("u1\t1:1 1:2\n", "ascending"),
        ("u1\t9:1\n", "outside"),
        ("u1\t-1:1\n", "outside"),
        ("u1\tx:1\n", "index"),
        ("u1\t0:1\nu1\t1:1\n", "duplicate"),
        ("u1\t0 1\n", "malformed"),
    ])
    def test_parse_errors_name_the_line(self, tmp_path, body, fragment):
        path = tmp_path / "bad.tsv"
        path.write_text("#d 8\n" + body)
        with pytest.raises(DatasetFormatError) as exc:
            load_dataset(path)
        assert "line" in str(exc.value)
        assert fragment in str(exc.value)

    def test_missing_header(self, tmp_path):
        path = tmp_path / "no_header.tsv"
        path.write_text("u1\t0:1\n")
        with pytest.raises(DatasetFormatError):
            load_dataset(path)

    def test_duplicate_user_rejected_in_memory(self):
        with pytest.raises(ValueError):
            Dataset.from_vectors([("a", sv([(0, 1.0)], 4)), ("a", sv([(1, 1.0)], 4))], 4)
