"""DTW and cosine distance against an exhaustive path-enumeration oracle."""

import numpy as np
import pytest

from artieval.dtw import cosine_distance, cosine_distance_matrix, dtw_distance

from evalhelpers import dtw_enumeration_oracle, random_walk_sequence, seq_of


class TestCosineDistance:
    def test_identity_exact_zero(self):
        u = np.array([0.3, -1.2, 4.0])
        assert cosine_distance(u, u) == 0.0

    def test_opposite(self):
        u = np.array([1.0, 2.0])
        assert cosine_distance(u, -u) == pytest.approx(2.0, abs=1e-12)

    def test_orthogonal(self):
        assert cosine_distance([1.0, 0.0], [0.0, 1.0]) == 1.0

    def test_zero_vector_convention(self):
        assert cosine_distance([0.0, 0.0], [1.0, 2.0]) == 1.0
        assert cosine_distance([1.0, 2.0], [0.0, 0.0]) == 1.0
        assert cosine_distance([0.0, 0.0], [0.0, 0.0]) == 1.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            cosine_distance([1.0], [1.0, 2.0])

    def test_range(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            d = cosine_distance(rng.standard_normal(4), rng.standard_normal(4))
            assert 0.0 <= d <= 2.0

    def test_matrix_agrees_with_scalar(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((5, 3))
        b = rng.standard_normal((7, 3))
        m = cosine_distance_matrix(a, b)
        for i in range(5):
            for j in range(7):
                assert m[i, j] == pytest.approx(cosine_distance(a[i], b[j]), abs=1e-12)

    def test_matrix_zero_rows(self):
        a = np.array([[0.0, 0.0], [1.0, 0.0]])
        b = np.array([[0.0, 1.0], [0.0, 0.0]])
        m = cosine_distance_matrix(a, b)
        assert m[0, 0] == 1.0
        assert m[0, 1] == 1.0
        assert m[1, 1] == 1.0
        assert m[1, 0] == 1.0  # orthogonal


class TestDtwBasics:
    def test_self_distance_zero(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((8, 3))
        assert dtw_distance(x, x) == 0.0

    def test_length_one_pair_is_cosine(self):
        u = np.array([[1.0, 2.0]])
        v = np.array([[2.0, -1.0]])
        assert dtw_distance(u, v) == cosine_distance(u[0], v[0])

    def test_symmetric(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            a = rng.standard_normal((int(rng.integers(2, 9)), 3))
            b = rng.standard_normal((int(rng.integers(2, 9)), 3))
            assert dtw_distance(a, b) == dtw_distance(b, a)

    def test_accepts_frame_sequences(self):
        a = seq_of(np.random.default_rng(4).standard_normal((4, 2)))
        assert dtw_distance(a, a) == 0.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            dtw_distance(np.empty((0, 2)), np.ones((3, 2)))

    def test_dim_mismatch_rejected(self):
        with pytest.raises(ValueError):
            dtw_distance(np.ones((3, 2)), np.ones((3, 4)))

    def test_repetition_invariance_direction(self):
        # stretching one sequence cannot increase the mean distance much;
        # identical content stretched stays at zero
        x = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        stretched = np.repeat(x, 3, axis=0)
        assert dtw_distance(x, stretched) == pytest.approx(0.0, abs=1e-12)


class TestDtwOracle:
    def test_matches_enumeration_on_independent_frames(self):
        # implementation contract: the returned value is the summed-distance
        # optimum divided by that path's length, for any input whatsoever
        rng = np.random.default_rng(20)
        for _ in range(150):
            t1 = int(rng.integers(1, 7))
            t2 = int(rng.integers(1, 7))
            d = int(rng.integers(1, 5))
            a = rng.standard_normal((t1, d))
            b = rng.standard_normal((t2, d))
            got = dtw_distance(a, b)
            _, sum_optimal_means, _ = dtw_enumeration_oracle(cosine_distance_matrix(a, b))
            assert min(abs(got - m) for m in sum_optimal_means) < 1e-9

    def test_mean_normalization_near_mean_optimal_on_smooth_sequences(self):
        # the sum-optimal path's mean is only a surrogate for a true
        # mean-optimal alignment; on smooth trajectories the value gap
        # stays small, and this quantifies it
        rng = np.random.default_rng(20)
        n_pairs = 150
        rel_gaps = []
        for _ in range(n_pairs):
            t1 = int(rng.integers(1, 7))
            t2 = int(rng.integers(1, 7))
            d = int(rng.integers(1, 5))
            a = random_walk_sequence(rng, t1, d)
            b = random_walk_sequence(rng, t2, d)
            got = dtw_distance(a, b)
            _, sum_optimal_means, best_mean = dtw_enumeration_oracle(cosine_distance_matrix(a, b))
            assert min(abs(got - m) for m in sum_optimal_means) < 1e-9
            assert got >= best_mean - 1e-12
            rel_gaps.append((got - best_mean) / best_mean if best_mean > 1e-12 else 0.0)
        assert sum(rel_gaps) / n_pairs < 0.05

    def test_tie_break_prefers_diagonal(self):
        # constant distance matrix: every step costs the same, so the
        # shortest (diagonal-heavy) path wins on the summed objective
        a = np.tile([1.0, 0.0], (4, 1))
        b = np.tile([0.0, 1.0], (4, 1))
        # all distances are 1; optimal sum path is the pure diagonal (len 4)
        assert dtw_distance(a, b) == pytest.approx(1.0, abs=1e-12)


class TestScaleInvariance:
    def test_distance_sign_stable_under_scaling(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            a = rng.standard_normal((5, 3))
            b = rng.standard_normal((6, 3))
            x = rng.standard_normal((4, 3))
            delta = dtw_distance(b, x) - dtw_distance(a, x)
            delta3 = dtw_distance(b * 3.0, x * 3.0) - dtw_distance(a * 3.0, x * 3.0)
            assert delta == pytest.approx(delta3, abs=1e-12)
            assert np.sign(delta) == np.sign(delta3)
