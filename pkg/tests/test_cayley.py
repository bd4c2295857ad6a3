import warnings

import numpy as np
import pytest

from givenspq.cayley import (
    CayleyConditioningWarning,
    CayleyState,
    cayley_gradient,
    cayley_inverse,
    cayley_rotation,
    cayley_step,
    skew,
)
from givenspq.convergence import ConvexObjective, analytic_minimum, objective_eval
from givenspq.linalg import orthonormality_defect, random_rotation


def random_antisymmetric(n, rng, scale=1.0):
    return skew(scale * rng.standard_normal((n, n)))


class TestCayleyRotation:
    def test_zero(self):
        np.testing.assert_array_equal(cayley_rotation(np.zeros((4, 4))), np.eye(4))

    def test_two_by_two_closed_form(self):
        a = 1.0
        A = np.array([[0.0, -a], [a, 0.0]])
        expected = np.array([[1 - a * a, 2 * a], [-2 * a, 1 - a * a]]) / (1 + a * a)
        np.testing.assert_allclose(cayley_rotation(A), expected, atol=1e-15)
        np.testing.assert_allclose(expected, [[0, 1], [-1, 0]])

    def test_orthonormal(self):
        R = cayley_rotation(random_antisymmetric(8, np.random.default_rng(0)))
        assert orthonormality_defect(R) < 1e-10
        assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-8)

    def test_rejects_non_antisymmetric(self):
        with pytest.raises(ValueError):
            cayley_rotation(np.ones((3, 3)))

    def test_inverse_round_trip(self):
        A = random_antisymmetric(6, np.random.default_rng(1))
        np.testing.assert_allclose(cayley_inverse(cayley_rotation(A)), A, atol=1e-12)

    def test_warns_near_minus_one_eigenvalue(self):
        # one plane near a half-turn, one plane at rest: ||A|| -> inf unevenly
        A = np.zeros((4, 4))
        A[0, 1], A[1, 0] = -1e9, 1e9
        with pytest.warns(CayleyConditioningWarning):
            cayley_rotation(A)

    def test_no_warning_when_well_conditioned(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            cayley_rotation(random_antisymmetric(5, np.random.default_rng(2)))


class TestCayleyState:
    def test_antisymmetry_is_structural(self):
        s = CayleyState.from_matrix(np.random.default_rng(3).standard_normal((5, 5)))
        assert np.all(s.A + s.A.T == 0.0)

    def test_cached_rotation(self):
        s = CayleyState.from_matrix(random_antisymmetric(6, np.random.default_rng(4)))
        np.testing.assert_allclose(s.R, cayley_rotation(s.A), atol=1e-10)

    def test_from_rotation(self):
        R = random_rotation(6, 5)
        np.testing.assert_allclose(CayleyState.from_rotation(R).R, R, atol=1e-10)

    def test_base_factor(self):
        base = random_rotation(4, 6)
        np.testing.assert_allclose(CayleyState.zeros(4, base=base).R, base, atol=1e-15)


class TestCayleyGradient:
    @pytest.mark.parametrize("seed", range(5))
    def test_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        n = 6
        X, T = rng.standard_normal((20, n)), rng.standard_normal((20, n))

        def loss(A):
            R = cayley_rotation(A)
            return np.sum((X @ R - T) ** 2)

        base = random_rotation(n, rng) if seed % 2 else None
        s = CayleyState.from_matrix(random_antisymmetric(n, rng, 0.5), base=base)
        G = 2 * X.T @ (X @ s.R - T)
        grad = cayley_gradient(s, G)
        h = 1e-5
        for i in range(n):
            for j in range(i + 1, n):
                E = np.zeros((n, n))
                E[i, j], E[j, i] = 1.0, -1.0

                def full(A):
                    return loss(A) if base is None else np.sum((X @ base @ cayley_rotation(A) - T) ** 2)

                fd = (full(s.A + h * E) - full(s.A - h * E)) / (2 * h)
                analytic = np.sum(grad * E)
                assert abs(analytic - fd) <= 1e-4 * max(abs(fd), 1e-8)

    def test_zero_gradient_keeps_state(self):
        s = CayleyState.from_matrix(random_antisymmetric(5, np.random.default_rng(7)))
        s2 = cayley_step(s, np.zeros((5, 5)), 0.1)
        np.testing.assert_array_equal(s2.upper, s.upper)
        np.testing.assert_array_equal(s2.R, s.R)

    def test_small_step_descends(self):
        obj = ConvexObjective.random_dot(8, seed=8)
        s = CayleyState.zeros(8)
        value, g = objective_eval(obj, s.R)
        s2 = cayley_step(s, g, 1e-3)
        assert objective_eval(obj, s2.R)[0] < value

    def test_reaches_dot_minimum(self):
        obj = ConvexObjective.random_dot(8, seed=9)
        s = CayleyState.zeros(8)
        for _ in range(5000):
            s = cayley_step(s, objective_eval(obj, s.R)[1], 0.05)
        assert objective_eval(obj, s.R)[0] - analytic_minimum(obj) < 1e-2
