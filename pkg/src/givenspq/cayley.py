"""Cayley-transform rotation learner, the comparison baseline.

The rotation is parameterized as ``R = base @ (I - A)(I + A)^{-1}`` with
``A`` antisymmetric. ``A`` is stored as its strict upper triangle so that
antisymmetry holds by construction.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .linalg import as_matrix

#: Warn when the 1-norm condition estimate of ``I + A`` exceeds this.
COND_WARN = 1e8


class CayleyConditioningWarning(RuntimeWarning):
    """``I + A`` is badly conditioned: R is drifting toward a -1 eigenvalue."""


class CayleySolveError(ArithmeticError):
    pass


def skew(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m - m.T)


@lru_cache(maxsize=16)
def _upper(n: int) -> tuple[np.ndarray, np.ndarray]:
    iu = np.triu_indices(n, k=1)
    for a in iu:
        a.flags.writeable = False
    return iu


@lru_cache(maxsize=16)
def _flat_upper(n: int) -> tuple[np.ndarray, np.ndarray]:
    # Raveled positions of (i, j) and (j, i) for i < j.
    i, j = _upper(n)
    flat, flat_t = i * n + j, j * n + i
    flat.flags.writeable = flat_t.flags.writeable = False
    return flat, flat_t


def _shift_diagonal(a: np.ndarray, c: float) -> np.ndarray:
    out = a.copy()
    out.flat[:: a.shape[0] + 1] += c
    return out


def _norm1(a: np.ndarray) -> float:
    # Induced 1-norm: largest absolute column sum.
    return float(np.abs(a).sum(axis=0).max())


def _solve_rotation(a: np.ndarray) -> np.ndarray:
    # (I + A)^{-1} (I - A) equals (I - A)(I + A)^{-1}: the factors commute.
    ia = _shift_diagonal(a, 1.0)
    try:
        r = np.linalg.solve(ia, _shift_diagonal(-a, 1.0))  # LU with partial pivoting
    except np.linalg.LinAlgError as exc:
        raise CayleySolveError("I + A is singular") from exc
    # (I + A)^{-1} = (I + R) / 2, so the estimate needs no explicit inverse.
    cond = _norm1(ia) * 0.5 * _norm1(_shift_diagonal(r, 1.0))
    if not np.isfinite(cond):
        raise CayleySolveError("I + A inverse is not finite")
    if cond > COND_WARN:
        warnings.warn(
            f"I + A has 1-norm condition estimate {cond:.3g}; the rotation is "
            "approaching an eigenvalue of -1",
            CayleyConditioningWarning,
            stacklevel=3,
        )
    return r


def cayley_rotation(a) -> np.ndarray:
    """``(I - A)(I + A)^{-1}`` for antisymmetric ``A``.

    The map is its own inverse, so ``cayley_rotation(R)`` recovers ``A``
    from a rotation without -1 eigenvalues.
    """
    a = as_matrix(a, "A", square=True)
    if np.linalg.norm(a + a.T) > 1e-12 * max(1.0, np.linalg.norm(a)):
        raise ValueError("A must be antisymmetric")
    return _solve_rotation(a)


def cayley_inverse(r) -> np.ndarray:
    """Antisymmetric ``A`` with ``cayley_rotation(A) == R``."""
    r = as_matrix(r, "R", square=True)
    n = r.shape[0]
    try:
        a = np.linalg.solve(np.eye(n) + r, np.eye(n) - r)
    except np.linalg.LinAlgError as exc:
        raise CayleySolveError("R has an eigenvalue of -1") from exc
    return skew(a)


@dataclass
class CayleyState:
    """Cayley parameters plus the cached rotation.

    ``upper`` holds ``A[i, j]`` for ``i < j`` in ``np.triu_indices`` order.
    ``base`` (identity when ``None``) is a fixed left factor; it lets the
    parameters be reset to zero at an arbitrary rotation.
    """

    n: int
    upper: np.ndarray
    base: np.ndarray | None = None
    R: np.ndarray | None = None
    local: np.ndarray | None = None

    def __post_init__(self):
        self.upper = np.asarray(self.upper, dtype=np.float64).copy()
        if self.upper.shape != (self.n * (self.n - 1) // 2,):
            raise ValueError("upper-triangle parameter vector has the wrong length")
        if self.R is None or self.local is None:
            self.local = _solve_rotation(self.A)
            self.R = self.local if self.base is None else self.base @ self.local

    @classmethod
    def zeros(cls, n: int, base=None) -> "CayleyState":
        return cls(n, np.zeros(n * (n - 1) // 2), None if base is None else as_matrix(base, "base"))

    @classmethod
    def from_matrix(cls, a, base=None) -> "CayleyState":
        a = as_matrix(a, "A", square=True)
        n = a.shape[0]
        return cls(n, skew(a)[_upper(n)], base)

    @classmethod
    def from_rotation(cls, r) -> "CayleyState":
        """Parameters reproducing ``r`` with no base factor."""
        return cls.from_matrix(cayley_inverse(r))

    @property
    def A(self) -> np.ndarray:
        flat, flat_t = _flat_upper(self.n)
        a = np.zeros(self.n * self.n)
        a[flat] = self.upper
        a[flat_t] = -self.upper
        return a.reshape(self.n, self.n)


def cayley_gradient(state: CayleyState, g) -> np.ndarray:
    """Gradient of the loss with respect to ``A``, as an antisymmetric matrix.

    From ``dR = -(I + R) dA (I + A)^{-1}`` (for the local factor),
    ``grad_A = skew(-(I + R)^T G (I + A)^{-T})``. The directional derivative
    along an antisymmetric direction ``E`` is ``<grad_A, E>``.
    """
    g = as_matrix(g, "G", square=True)
    if g.shape != (state.n, state.n):
        raise ValueError(f"gradient has shape {g.shape}, expected {(state.n, state.n)}")
    if state.base is not None:
        g = state.base.T @ g
    # (I + A)^{-1} = (I + R) / 2 for the local factor.
    ip = _shift_diagonal(state.local, 1.0).T
    m = -0.5 * ((ip @ g) @ ip)
    return skew(m)


def cayley_step(state: CayleyState, g, lr: float) -> CayleyState:
    """Plain gradient step ``A <- A - lr * grad_A`` followed by re-evaluation of ``R``."""
    grad = cayley_gradient(state, g)
    return CayleyState(state.n, state.upper - lr * grad.reshape(-1)[_flat_upper(state.n)[0]], state.base)
