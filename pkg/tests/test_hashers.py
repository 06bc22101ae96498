"""Hashing family tests: determinism, consistency, collision laws, sparsity."""

import numpy as np
import pytest

import kcohort.rng as rng
from kcohort import (
    HashMethod,
    SparseVector,
    UndefinedHashError,
    binary_jaccard,
    cws_sample,
    cws_samples_for_seeds,
    cws_zero_bit,
    hash_matrix,
    hash_vector,
    minhash,
    pgmm,
    signrp,
)
from kcohort.hashers import cws_draws, signrp_raw

from conftest import make_dataset, sv

EXP = 42


class TestCwsSampler:
    def test_single_nonzero_always_wins(self):
        u = sv([(17, 3.0)], 100)
        for seed in range(50):
            assert cws_sample(u, 1.0, seed, EXP).istar == 17

    def test_zero_bit_is_istar(self):
        u = sv([(0, 1.0), (5, 0.3), (9, 7.0)], 10)
        for seed in range(30):
            assert cws_zero_bit(u, 1.2, seed, EXP) == cws_sample(u, 1.2, seed, EXP).istar

    def test_empty_vector_rejected(self):
        empty = SparseVector(np.array([], dtype=np.int64), np.array([]), 4)
        with pytest.raises(UndefinedHashError):
            cws_sample(empty, 1.0, 0, EXP)

    def test_scale_p_identity_spot(self):
        gen = np.random.default_rng(3)
        for trial in range(50):
            size = int(gen.integers(1, 12))
            dims = np.sort(gen.choice(64, size=size, replace=False))
            weights = gen.uniform(0.05, 20.0, size=size)
            u = SparseVector(dims, weights, 64)
            powered = SparseVector(dims, weights ** 1.7, 64)
            assert cws_sample(u, 1.7, trial, EXP) == cws_sample(powered, 1.0, trial, EXP)

    def test_consistency_of_shared_dimension_draws(self):
        # Two different vectors sharing dimension 11 must see the same draws.
        x = sv([(2, 1.0), (11, 4.0)], 20)
        y = sv([(11, 0.2), (19, 9.0)], 20)
        rx = cws_draws(x.dims, sample_seed=5, experiment_seed=EXP)
        ry = cws_draws(y.dims, sample_seed=5, experiment_seed=EXP)
        for draws_x, draws_y in zip(rx, ry):
            assert draws_x[1] == draws_y[0]  # dimension 11 in both supports

    def test_per_seed_batch_matches_scalar(self):
        u = sv([(0, 0.5), (3, 2.0), (7, 1.0)], 10)
        istars, tstars = cws_samples_for_seeds(u, 0.8, np.arange(64), EXP)
        for seed in range(64):
            sample = cws_sample(u, 0.8, seed, EXP)
            assert (sample.istar, sample.tstar) == (istars[seed], tstars[seed])

    def test_full_tuple_collision_law_spot(self):
        # pgmm(x, y, 1) = 0.5 pair; the tuple-collision rate must track it.
        x = sv([(0, 1.0), (1, 2.0)], 4)
        y = sv([(0, 2.0), (1, 1.0)], 4)
        assert pgmm(x, y, 1.0) == 0.5
        seeds = np.arange(10_000)
        ix, tx = cws_samples_for_seeds(x, 1.0, seeds, EXP)
        iy, ty = cws_samples_for_seeds(y, 1.0, seeds, EXP)
        rate = np.mean((ix == iy) & (tx == ty))
        assert abs(rate - 0.5) <= 0.015

    def test_zero_bit_rate_tracks_kernel(self):
        # 10 shared unit dims plus 5 private per side: pgmm is exactly 0.5.
        # (The i*-only approximation needs realistic supports; on degenerate
        # 2-dim vectors it is visibly biased, which the tuple law is not.)
        x = sv([(i, 1.0) for i in range(10)] + [(20 + i, 1.0) for i in range(5)], 64)
        y = sv([(i, 1.0) for i in range(10)] + [(40 + i, 1.0) for i in range(5)], 64)
        assert pgmm(x, y, 1.0) == 0.5
        seeds = np.arange(10_000)
        ix, _ = cws_samples_for_seeds(x, 1.0, seeds, EXP)
        iy, _ = cws_samples_for_seeds(y, 1.0, seeds, EXP)
        assert abs(np.mean(ix == iy) - 0.5) <= 0.03


class TestMinHash:
    def test_identical_supports_always_collide(self):
        x = sv([(1, 5.0), (4, 0.1)], 8)
        y = sv([(1, 0.7), (4, 9.0)], 8)
        for seed in range(100):
            assert minhash(x, seed, EXP) == minhash(y, seed, EXP)

    def test_half_jaccard_collision_rate(self):
        x = sv([(1, 1.0), (2, 1.0), (3, 1.0)], 8)
        y = sv([(2, 1.0), (3, 1.0), (4, 1.0)], 8)
        assert binary_jaccard(x, y) == 0.5
        hx = hash_vector(x, HashMethod.minhash(), 10_000, EXP).values
        hy = hash_vector(y, HashMethod.minhash(), 10_000, EXP).values
        assert abs(np.mean(hx == hy) - 0.5) <= 0.015

    def test_disjoint_supports_never_collide(self):
        x = sv([(0, 1.0), (1, 1.0)], 8)
        y = sv([(4, 1.0), (5, 1.0)], 8)
        hx = hash_vector(x, HashMethod.minhash(), 10_000, EXP).values
        hy = hash_vector(y, HashMethod.minhash(), 10_000, EXP).values
        assert np.mean(hx == hy) <= 1e-3

    def test_empty_support_rejected(self):
        empty = SparseVector(np.array([], dtype=np.int64), np.array([]), 4)
        with pytest.raises(UndefinedHashError):
            minhash(empty, 0, EXP)


class TestSignRP:
    def test_positive_scaling_preserves_bit(self):
        x = sv([(0, 1.0), (3, 2.0), (5, 0.5)], 8)
        y = x.scale(2.0)
        for seed in range(200):
            assert signrp(x, seed, EXP) == signrp(y, seed, EXP)

    def test_orthogonal_pair_collides_half_the_time(self):
        x = sv([(0, 1.0), (1, 2.0)], 8)
        y = sv([(4, 3.0), (5, 1.0)], 8)
        hx = hash_vector(x, HashMethod.signrp(), 10_000, EXP).values
        hy = hash_vector(y, HashMethod.signrp(), 10_000, EXP).values
        assert abs(np.mean(hx == hy) - 0.5) <= 0.015

    def test_antipodal_never_collides(self):
        dims = np.arange(6)
        weights = np.array([1.0, -2.0, 0.5, 3.0, -1.0, 0.25])
        agree = sum(
            signrp_raw(dims, weights, seed, EXP) == signrp_raw(dims, -weights, seed, EXP)
            for seed in range(10_000))
        assert agree / 10_000 <= 1e-3


class TestHashVector:
    def test_m1_matches_single_sample(self):
        u = sv([(0, 1.0), (2, 3.0)], 5)
        assert hash_vector(u, HashMethod.cws(p=1.0), 1, EXP)[0] == cws_zero_bit(u, 1.0, 0, EXP)
        assert hash_vector(u, HashMethod.minhash(), 1, EXP)[0] == minhash(u, 0, EXP)
        assert hash_vector(u, HashMethod.signrp(), 1, EXP)[0] == signrp(u, 0, EXP)

    def test_identical_users_identical_vectors(self):
        u = sv([(0, 1.0), (2, 3.0)], 5)
        v = sv([(0, 1.0), (2, 3.0)], 5)
        for method in (HashMethod.cws(), HashMethod.minhash(), HashMethod.signrp()):
            assert hash_vector(u, method, 25, EXP) == hash_vector(v, method, 25, EXP)

    def test_similar_pair_dominates_dissimilar_pair(self):
        gen = np.random.default_rng(11)
        wins = 0
        for trial in range(20):
            d = 64
            base = gen.uniform(1.0, 4.0, size=16)
            dims = np.sort(gen.choice(d, size=16, replace=False))
            x = SparseVector(dims, base, d)
            similar = SparseVector(dims, base * gen.uniform(0.9, 1.1, size=16), d)
            other_dims = np.sort(gen.choice(d, size=16, replace=False))
            dissimilar = SparseVector(other_dims, gen.uniform(1.0, 4.0, size=16), d)
            assert pgmm(x, similar, 1.0) > 0.7
            method = HashMethod.cws()
            hx = hash_vector(x, method, 100, EXP + trial).values
            agree_similar = np.mean(hx == hash_vector(similar, method, 100, EXP + trial).values)
            agree_other = np.mean(hx == hash_vector(dissimilar, method, 100, EXP + trial).values)
            wins += agree_similar > agree_other
        assert wins == 20

    def test_full_bits_mode_distinguishes_levels(self):
        u = sv([(0, 1.0), (2, 3.0)], 5)
        zero = hash_vector(u, HashMethod.cws(bits="zero"), 10, EXP)
        full = hash_vector(u, HashMethod.cws(bits="full"), 10, EXP)
        assert zero != full

    def test_matrix_rows_match_vectors(self):
        vectors = [
            sv([(0, 1.0), (3, 0.5)], 12),
            sv([(1, 2.0)], 12),
            sv([(0, 0.25), (5, 5.0), (11, 1.0)], 12),
        ]
        dataset = make_dataset(vectors)
        for method in (HashMethod.cws(p=0.9), HashMethod.cws(bits="full"),
                       HashMethod.minhash(), HashMethod.signrp()):
            matrix = hash_matrix(dataset, method, 17, EXP)
            for i, vec in enumerate(vectors):
                assert np.array_equal(matrix[i], hash_vector(vec, method, 17, EXP).values)

    def test_matrix_thread_count_does_not_change_result(self):
        vectors = [sv([(i % 7, 1.0 + i), ((i + 3) % 7 + 7, 0.5)], 16) for i in range(40)]
        dataset = make_dataset(vectors)
        for method in (HashMethod.cws(), HashMethod.minhash(), HashMethod.signrp()):
            single = hash_matrix(dataset, method, 9, EXP, threads=1)
            pooled = hash_matrix(dataset, method, 9, EXP, threads=8)
            assert np.array_equal(single, pooled)


class TestSparsityComplexity:
    def test_draw_layer_touches_support_not_dimensionality(self, monkeypatch):
        d = 1_000_000
        support = 10
        u = SparseVector(np.arange(0, d, d // support)[:support],
                         np.linspace(1.0, 2.0, support), d)
        counted = {"elements": 0}
        real = rng.word_array

        def counting(*args):
            out = real(*args)
            counted["elements"] += out.size
            return out

        monkeypatch.setattr(rng, "word_array", counting)
        cws_sample(u, 1.0, 0, EXP)
        minhash(u, 0, EXP)
        signrp(u, 0, EXP)
        # 5 word streams for the sampler + 1 for minhash + 2 for the
        # projection: comfortably linear in the support, nowhere near d.
        assert counted["elements"] <= 32 * support
        assert counted["elements"] < d // 100
