import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from givenspq.linalg import (
    GivensPlan,
    RotationState,
    givens_apply_right,
    givens_matrix,
    orthonormality_defect,
    procrustes,
    random_rotation,
    reorthonormalize,
    svd,
)


def dense_product(m, pairs):
    """Naive oracle: multiply by materialized rotation matrices in order."""
    out = np.array(m, dtype=float)
    n = out.shape[1]
    for i, j, t in pairs:
        out = out @ givens_matrix(n, i, j, t)
    return out


def random_plan(n, rng, scale=math.pi):
    perm = rng.permutation(n) + 1
    half = n // 2
    return GivensPlan.from_pairs(
        (min(a, b), max(a, b), rng.uniform(-scale, scale))
        for a, b in zip(perm[:2 * half:2], perm[1:2 * half:2])
    )


class TestGivensApply:
    def test_quarter_turn_on_identity(self):
        out = givens_apply_right(np.eye(2), GivensPlan.from_pairs([(1, 2, math.pi / 2)]))
        np.testing.assert_allclose(out, [[0, -1], [1, 0]], atol=1e-15)

    def test_zero_angles_are_identity(self):
        m = np.random.default_rng(0).standard_normal((5, 6))
        plan = GivensPlan.from_pairs([(1, 4, 0.0), (2, 3, 0.0), (5, 6, 0.0)])
        np.testing.assert_array_equal(givens_apply_right(m, plan), m)

    def test_matches_dense_multiplication(self):
        m = np.random.default_rng(1).standard_normal((3, 4))
        pairs = [(1, 3, 0.7), (2, 4, -0.2)]
        out = givens_apply_right(m, GivensPlan.from_pairs(pairs))
        np.testing.assert_allclose(out, dense_product(m, pairs), rtol=0, atol=1e-12)

    def test_overlapping_applies_in_list_order(self):
        m = np.random.default_rng(2).standard_normal((4, 5))
        pairs = [(1, 2, 0.3), (1, 3, -1.1), (2, 3, 0.5), (1, 2, 2.0)]
        out = givens_apply_right(m, GivensPlan.from_pairs(pairs, overlapping=True))
        np.testing.assert_allclose(out, dense_product(m, pairs), atol=1e-12)

    def test_input_not_modified(self):
        m = np.eye(3)
        givens_apply_right(m, GivensPlan.from_pairs([(1, 3, 1.0)]))
        np.testing.assert_array_equal(m, np.eye(3))

    def test_rejects_duplicate_axis(self):
        with pytest.raises(ValueError, match="duplicate"):
            GivensPlan.from_pairs([(1, 2, 0.1), (2, 3, 0.2)])

    def test_rejects_out_of_range(self):
        with pytest.raises(IndexError):
            givens_apply_right(np.eye(3), GivensPlan.from_pairs([(1, 4, 0.1)]))
        with pytest.raises(IndexError):
            GivensPlan.from_pairs([(0, 2, 0.1)])

    def test_rejects_unordered_pair(self):
        with pytest.raises(ValueError):
            GivensPlan.from_pairs([(3, 2, 0.1)])

    @settings(max_examples=60, deadline=None)
    @given(n=st.integers(2, 24), k=st.integers(1, 6), seed=st.integers(0, 2**32 - 1))
    def test_order_independence_and_isometry(self, n, k, seed):
        rng = np.random.default_rng(seed)
        m = rng.standard_normal((k, n))
        plan = random_plan(n, rng)
        out = givens_apply_right(m, plan)
        shuffled = rng.permutation(len(plan))
        plan2 = GivensPlan(plan.first[shuffled], plan.second[shuffled], plan.theta[shuffled])
        np.testing.assert_allclose(givens_apply_right(m, plan2), out, rtol=0, atol=1e-14)
        np.testing.assert_allclose(
            np.linalg.norm(out, axis=1), np.linalg.norm(m, axis=1), rtol=1e-12
        )
        back = givens_apply_right(out, plan.inverse())
        np.testing.assert_allclose(back, m, rtol=0, atol=1e-12 * np.abs(m).max())


class TestSVD:
    def test_identity(self):
        _, s, _ = svd(np.eye(4))
        np.testing.assert_allclose(s, np.ones(4))

    def test_diagonal(self):
        u, s, v = svd(np.diag([3.0, 2.0]))
        np.testing.assert_allclose(s, [3, 2])
        np.testing.assert_allclose(np.abs(u @ v.T), np.eye(2), atol=1e-15)

    @pytest.mark.parametrize("seed", range(5))
    def test_reconstruction(self, seed):
        m = np.random.default_rng(seed).standard_normal((6, 6))
        u, s, v = svd(m)
        assert np.linalg.norm(u @ np.diag(s) @ v.T - m) / np.linalg.norm(m) < 1e-10
        np.testing.assert_allclose(u.T @ u, np.eye(6), atol=1e-10)
        np.testing.assert_allclose(v.T @ v, np.eye(6), atol=1e-10)
        assert np.all(s >= 0) and np.all(np.diff(s) <= 0)

    def test_rejects_rectangular(self):
        with pytest.raises(ValueError):
            svd(np.ones((2, 3)))

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            svd(np.array([[1.0, np.nan], [0.0, 1.0]]))


class TestProcrustes:
    def test_orthogonal_input_is_fixed_point(self):
        q = random_rotation(5, 3)
        np.testing.assert_allclose(procrustes(q), q, atol=1e-10)

    def test_positive_diagonal(self):
        np.testing.assert_allclose(procrustes(np.diag([2.0, 3.0])), np.eye(2), atol=1e-15)

    def test_beats_random_rotations(self):
        rng = np.random.default_rng(4)
        c = rng.standard_normal((4, 4))
        best = np.sum(c * procrustes(c))
        samples = [np.sum(c * random_rotation(4, rng)) for _ in range(10_000)]
        assert best >= max(samples)

    def test_special_orthogonal_output(self):
        # det(U V^T) = -1 here, so the SO(n) correction must kick in
        c = np.diag([3.0, 2.0, -1.0])
        r = procrustes(c)
        assert np.linalg.det(r) == pytest.approx(1.0)
        np.testing.assert_allclose(r, np.diag([1.0, 1.0, 1.0]), atol=1e-12)
        r_o = procrustes(c, special=False)
        np.testing.assert_allclose(r_o, np.diag([1.0, 1.0, -1.0]), atol=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_scale_invariance(self, seed):
        c = np.random.default_rng(seed).standard_normal((5, 5))
        np.testing.assert_allclose(procrustes(c), procrustes(2 * c), atol=1e-10)


class TestDefect:
    def test_identity(self):
        assert orthonormality_defect(np.eye(8)) == 0.0

    def test_scaled_identity(self):
        assert orthonormality_defect(2 * np.eye(2)) == pytest.approx(3 * math.sqrt(2))

    def test_drift_of_many_plans(self):
        rng = np.random.default_rng(5)
        r = np.eye(64)
        for _ in range(10_000):
            r = givens_apply_right(r, random_plan(64, rng))
        assert orthonormality_defect(r) < 1e-8


class TestReorthonormalize:
    def test_identity(self):
        np.testing.assert_allclose(reorthonormalize(np.eye(3)), np.eye(3), atol=1e-15)

    def test_repairs_small_defect(self):
        rng = np.random.default_rng(6)
        q = random_rotation(8, rng)
        e = rng.standard_normal((8, 8))
        r = q + e * (1e-7 / orthonormality_defect(q + e))
        assert orthonormality_defect(r) > 1e-8
        fixed = reorthonormalize(r)
        assert orthonormality_defect(fixed) < 1e-12
        assert np.linalg.det(fixed) == pytest.approx(1.0, abs=1e-12)

    def test_perturbation_stays_close(self):
        rng = np.random.default_rng(7)
        q = random_rotation(8, rng)
        noisy = q + 1e-9 * rng.standard_normal((8, 8))
        assert np.linalg.norm(reorthonormalize(noisy) - q) < 1e-8


class TestRotationState:
    def test_rejects_reflection(self):
        with pytest.raises(ValueError, match="determinant"):
            RotationState(np.diag([1.0, -1.0]))

    def test_rejects_non_orthogonal(self):
        with pytest.raises(ValueError, match="orthonormal"):
            RotationState(2 * np.eye(2))

    def test_drift_repair_fires_above_threshold(self):
        s = RotationState.identity(4)
        bad = np.eye(4) + 1e-5 * np.random.default_rng(0).standard_normal((4, 4))
        s2 = s.advanced(bad)
        assert s2.reorth_count == 1
        assert s2.defect < 1e-12
        assert s2.steps_applied == 1

    def test_periodic_repair(self):
        s = RotationState.identity(3)
        s.since_reorth = 99_999
        assert s.advanced(np.eye(3)).reorth_count == 1
