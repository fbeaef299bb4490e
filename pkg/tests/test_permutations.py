import time

import numpy as np
import pytest

from utils.data import ScoreMatrix
from utils.permutations import (
    PValueMatrix,
    eval_p_values,
    exact_pairwise_p_value,
    generate_sign_matrix,
    naive_p_value_matrix,
    pairwise_p_values,
    project_eval_set,
    project_systems,
)
from utils.streams import derive_key, keyed_stream, random_bit_rows, stream
from utils.synthetic import make_synthetic_eval_set, make_uniform_score_matrix


def _p_values(m: ScoreMatrix, seed: int = 0, n_perms: int = 1000, threads: int = 1) -> PValueMatrix:
    sm = generate_sign_matrix(seed, n_perms, m.n_segments, threads=threads)
    return pairwise_p_values(project_systems(m, sm), threads)


class TestStreams:
    def test_chunking_is_transparent(self):
        key = derive_key(7, 3)
        full = random_bit_rows(key, 0, 10, 300)
        np.testing.assert_array_equal(random_bit_rows(key, 3, 7, 300), full[3:])

    def test_streams_differ(self):
        a = stream(0, 1).integers(0, 2**32, size=8)
        np.testing.assert_array_equal(a, stream(0, 1).integers(0, 2**32, size=8))
        assert not np.array_equal(a, stream(0, 2).integers(0, 2**32, size=8))
        assert not np.array_equal(a, stream(0, 1, offset=1).integers(0, 2**32, size=8))

    def test_negative_seed(self):
        with pytest.raises(ValueError):
            derive_key(-1)

    def test_keyed_stream_matches_stream(self):
        key = derive_key(3, 2, 17)
        for offset in (0, 1, 999):
            expected = stream(3, 2, 17, offset=offset).integers(0, 2, size=40)
            np.testing.assert_array_equal(keyed_stream(key, offset).integers(0, 2, size=40), expected)


class TestSignMatrix:
    def test_shape_and_identity_row(self):
        sm = generate_sign_matrix(3, 50, 17)
        assert sm.signs.shape == (51, 17)
        assert sm.n_perms == 50
        assert sm.n_segments == 17
        assert np.all(sm.signs[0] == 1)
        assert set(np.unique(sm.signs)) <= {-1, 1}

    def test_deterministic(self):
        np.testing.assert_array_equal(generate_sign_matrix(3, 600, 40).signs, generate_sign_matrix(3, 600, 40).signs)
        assert not np.array_equal(generate_sign_matrix(3, 600, 40).signs, generate_sign_matrix(4, 600, 40).signs)

    def test_threads_do_not_change_bits(self):
        np.testing.assert_array_equal(
            generate_sign_matrix(5, 700, 33, threads=1).signs, generate_sign_matrix(5, 700, 33, threads=4).signs
        )

    def test_balanced(self):
        signs = generate_sign_matrix(0, 2000, 100).signs[1:]
        assert abs(np.mean(signs == 1) - 0.5) < 0.01

    @pytest.mark.parametrize(("n_perms", "n_segments"), [(0, 5), (5, 0)])
    def test_invalid(self, n_perms, n_segments):
        with pytest.raises(ValueError):
            generate_sign_matrix(0, n_perms, n_segments)


class TestProjection:
    def test_matches_swapped_mean_difference(self):
        m = make_uniform_score_matrix(4, 25, seed=8)
        sm = generate_sign_matrix(1, 200, 25)
        proj = project_systems(m, sm).proj
        swap = sm.signs < 0
        for i, j in [(0, 1), (2, 3), (3, 0)]:
            x, y = m.scores[i], m.scores[j]
            direct = np.where(swap, y, x).mean(axis=1) - np.where(swap, x, y).mean(axis=1)
            np.testing.assert_allclose((proj[i] - proj[j]) / 25, direct, rtol=0, atol=1e-12)

    def test_linear_in_scores(self):
        m = make_uniform_score_matrix(4, 25, seed=8)
        other = make_uniform_score_matrix(4, 25, seed=9)
        sm = generate_sign_matrix(1, 200, 25)
        proj = project_systems(m, sm).proj
        row_sums = sm.signs.sum(axis=1)
        np.testing.assert_allclose(
            project_systems(m.affine(3.7, 11.0), sm).proj, 3.7 * proj + 11.0 * row_sums[None, :], rtol=1e-12, atol=1e-9
        )
        combined = ScoreMatrix(m.system_names, m.segment_ids, m.scores + other.scores)
        np.testing.assert_allclose(
            project_systems(combined, sm).proj, proj + project_systems(other, sm).proj, rtol=1e-12, atol=1e-12
        )

    def test_observed_row(self):
        m = make_uniform_score_matrix(3, 25, seed=2)
        projection = project_systems(m, generate_sign_matrix(0, 10, 25))
        np.testing.assert_array_equal(projection.swapped[:, 0], 0.0)
        np.testing.assert_array_equal(projection.proj[:, 0], projection.totals)

    def test_select_systems(self):
        m = make_uniform_score_matrix(5, 25, seed=2)
        sm = generate_sign_matrix(0, 10, 25)
        sub = project_systems(m, sm).select_systems([4, 1])
        assert sub.system_names == ("sys04", "sys01")
        np.testing.assert_array_equal(sub.swapped, project_systems(m, sm).swapped[[4, 1]])


class TestPairwisePValues:
    def test_antisymmetry(self):
        for seed in range(5):
            m = make_uniform_score_matrix(6, 40, seed=seed)
            p = _p_values(m, seed).p
            off_diagonal = ~np.eye(6, dtype=bool)
            assert np.all((p + p.T)[off_diagonal] == 1.0)
            np.testing.assert_array_equal(np.diag(p), 0.5)

    def test_affine_invariance(self):
        m = make_uniform_score_matrix(6, 50, seed=11)
        sm = generate_sign_matrix(2, 1000, 50)
        base = pairwise_p_values(project_systems(m, sm)).p
        np.testing.assert_array_equal(pairwise_p_values(project_systems(m.affine(3.7, 11.0), sm)).p, base)

    @pytest.mark.parametrize("seed", range(10))
    def test_affine_invariance_with_discrete_scores(self, seed):
        # Penalty-style scores: swapped sums tie exactly and often
        rng = np.random.default_rng(seed)
        scores = rng.choice([0.0, -1.0, -5.0, -25.0], size=(6, 20))
        m = ScoreMatrix(tuple(f"sys{i}" for i in range(6)), tuple(f"s{k}" for k in range(20)), scores)
        sm = generate_sign_matrix(seed, 1000, 20)
        base = pairwise_p_values(project_systems(m, sm)).p
        for scale, shift in [(3.7, 11.0), (0.01, -3.0), (250.0, 0.5)]:
            np.testing.assert_array_equal(pairwise_p_values(project_systems(m.affine(scale, shift), sm)).p, base)

    def test_exact_oracle_affine_invariance_with_ties(self):
        scores = [[0, -1, -5, 0, -25, -1] * 2, [-1, 0, -5, -5, 0, 0] * 2]
        m = ScoreMatrix(("x", "y"), tuple(f"s{k}" for k in range(12)), scores)
        assert exact_pairwise_p_value(m.affine(3.7, 11.0), 0, 1) == exact_pairwise_p_value(m, 0, 1)

    def test_shift_lowers_p_values(self):
        m = make_uniform_score_matrix(5, 30, seed=6)
        sm = generate_sign_matrix(0, 1000, 30)
        base = pairwise_p_values(project_systems(m, sm)).p
        for shift in (0.01, 0.05, 0.3):
            scores = m.scores.copy()
            scores[0] += shift
            shifted = pairwise_p_values(project_systems(ScoreMatrix(m.system_names, m.segment_ids, scores), sm)).p
            assert np.all(shifted[0, 1:] <= base[0, 1:])
            assert np.all(shifted[1:, 0] >= base[1:, 0])

    def test_identical_systems(self):
        rng = np.random.default_rng(0)
        row = rng.normal(size=30)
        m = ScoreMatrix(("a", "b", "c"), tuple(f"s{i}" for i in range(30)), [row, row, rng.normal(size=30)])
        p = _p_values(m)
        assert p.p[0, 1] == 0.5
        assert p.p[1, 0] == 0.5

    def test_clear_winner(self):
        m = ScoreMatrix(("good", "bad"), tuple(f"s{i}" for i in range(40)), [np.ones(40), np.zeros(40)])
        p = _p_values(m)
        assert p.p[0, 1] < 0.01
        assert p.p[1, 0] > 0.99

    def test_threads(self):
        m = make_uniform_score_matrix(7, 30, seed=4)
        np.testing.assert_array_equal(_p_values(m, threads=1).p, _p_values(m, threads=3).p)

    def test_subset_equals_sub_matrix(self):
        m = make_uniform_score_matrix(6, 30, seed=9)
        sm = generate_sign_matrix(1, 500, 30)
        full = pairwise_p_values(project_systems(m, sm))
        subset = [0, 2, 5]
        np.testing.assert_array_equal(
            pairwise_p_values(project_systems(m.select_systems(subset), sm)).p, full.select_systems(subset).p
        )

    def test_dimension_mismatch(self):
        m = make_uniform_score_matrix(3, 10)
        with pytest.raises(ValueError, match="segments"):
            project_systems(m, generate_sign_matrix(0, 10, 11))

    def test_eval_set_shares_cache(self, small_eval_set):
        sm = generate_sign_matrix(0, 200, len(small_eval_set.segment_ids))
        projection = project_eval_set(small_eval_set, sm)
        ph, pms = eval_p_values(projection)
        assert set(pms) == set(small_eval_set.metric_names)
        np.testing.assert_array_equal(ph.p, pairwise_p_values(project_systems(small_eval_set.human, sm)).p)

    def test_invalid_p_values(self):
        with pytest.raises(ValueError):
            PValueMatrix(np.array([[0.5, 1.5], [-0.5, 0.5]]), ("a", "b"))


class TestExactOracle:
    def test_hand_computed(self):
        one = ScoreMatrix(("x", "y"), ("s1",), [[1.0], [0.0]])
        # diffs over the two patterns: +1 (observed, tie) and -1
        assert exact_pairwise_p_value(one, "x", "y") == 0.25
        two = ScoreMatrix(("x", "y"), ("s1", "s2"), [[1.0, 1.0], [0.0, 0.0]])
        # diffs 2 (tie), 0, 0, -2
        assert exact_pairwise_p_value(two, 0, 1) == 0.125

    def test_too_many_segments(self):
        with pytest.raises(ValueError, match="limited"):
            exact_pairwise_p_value(make_uniform_score_matrix(2, 25), 0, 1)

    def test_unknown_system(self):
        with pytest.raises(ValueError, match="unknown system"):
            exact_pairwise_p_value(make_uniform_score_matrix(2, 5), "sys00", "nope")

    def test_monte_carlo_matches_enumeration(self):
        start = time.perf_counter()
        worst = 0.0
        for k in range(50):
            m = make_uniform_score_matrix(4, 10, seed=1000 + k)
            p = _p_values(m, seed=k, n_perms=4096).p
            for i in range(4):
                for j in range(i + 1, 4):
                    worst = max(worst, abs(p[i, j] - exact_pairwise_p_value(m, i, j)))
        assert worst <= 0.03
        assert time.perf_counter() - start < 10


class TestNaiveReference:
    def test_agrees_with_cached(self):
        m = make_uniform_score_matrix(5, 30, seed=21)
        naive = naive_p_value_matrix(m, seed=1, n_perms=4000).p
        np.testing.assert_allclose(naive, _p_values(m, seed=2, n_perms=4000).p, atol=0.06)
        off_diagonal = ~np.eye(5, dtype=bool)
        assert np.all((naive + naive.T)[off_diagonal] == 1.0)

    def test_cached_engine_is_faster(self):
        m = make_synthetic_eval_set(15, 1500, n_metrics=1, seed=0).human
        start = time.perf_counter()
        _p_values(m, n_perms=1000)
        cached = time.perf_counter() - start
        start = time.perf_counter()
        naive_p_value_matrix(m, seed=0, n_perms=1000)
        naive = time.perf_counter() - start
        assert cached < 1.0
        assert naive / cached >= 20
