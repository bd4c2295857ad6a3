"""Dense matrix primitives for rotation learning.

Matrices are plain ``float64`` numpy arrays in row-major order. Givens
rotations are never materialized; they are applied as in-place updates of
column pairs, which costs ``O(k n)`` for a ``k x n`` operand and one block
of ``n/2`` disjoint rotations.

Axis pairs are 1-based ``(i, j)`` with ``i < j`` in the public API and
0-based internally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numba
import numpy as np

#: Re-orthonormalize once the defect exceeds this value.
DEFECT_THRESHOLD = 1e-6
#: ... or unconditionally after this many steps since the last repair.
REORTH_PERIOD = 100_000


class SVDConvergenceError(ArithmeticError):
    """Raised when the SVD fails to converge."""


def as_matrix(a, name: str = "matrix", *, square: bool = False) -> np.ndarray:
    """Validate ``a`` as a finite 2-D float64 array and return it.

    The returned array is C-contiguous; it aliases ``a`` when no conversion
    was necessary.
    """
    if type(a) is np.ndarray and a.dtype == np.float64 and a.flags.c_contiguous:
        m = a
    else:
        m = np.ascontiguousarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if square and m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise ValueError(f"{name} contains NaN or Inf entries")
    return m


@dataclass(frozen=True)
class GivensPlan:
    """A block of planar rotations, applied on the right of a matrix.

    ``first[k] < second[k]`` are 0-based axes and ``theta[k]`` the angle in
    radians of the k-th rotation. In disjoint mode no axis may repeat, so
    the rotations commute; in overlapping mode they are applied in list
    order.
    """

    first: np.ndarray
    second: np.ndarray
    theta: np.ndarray
    overlapping: bool = False

    def __post_init__(self):
        first = np.ascontiguousarray(self.first, dtype=np.int64).ravel()
        second = np.ascontiguousarray(self.second, dtype=np.int64).ravel()
        theta = np.ascontiguousarray(self.theta, dtype=np.float64).ravel()
        if not (first.shape == second.shape == theta.shape):
            raise ValueError("first, second and theta must have equal length")
        if np.any(first < 0) or np.any(second < 0):
            raise IndexError("axis indices must be positive (1-based)")
        if np.any(first >= second):
            raise ValueError("every pair must satisfy i < j")
        if not np.all(np.isfinite(theta)):
            raise ValueError("angles must be finite")
        if not self.overlapping:
            axes = np.concatenate([first, second])
            if np.unique(axes).size != axes.size:
                raise ValueError("duplicate axis in a disjoint Givens plan")
        object.__setattr__(self, "first", first)
        object.__setattr__(self, "second", second)
        object.__setattr__(self, "theta", theta)

    @classmethod
    def trusted(cls, first, second, theta, overlapping: bool = False) -> "GivensPlan":
        """Build from arrays already known to be valid, skipping the checks.

        ``first``/``second`` must be int64 and ``theta`` float64, all 1-D
        and C-contiguous. Meant for hot loops that construct valid plans.
        """
        plan = object.__new__(cls)
        for name, value in (("first", first), ("second", second), ("theta", theta), ("overlapping", overlapping)):
            object.__setattr__(plan, name, value)
        return plan

    @classmethod
    def from_pairs(
        cls, pairs: Iterable[tuple[int, int, float]], overlapping: bool = False
    ) -> "GivensPlan":
        """Build a plan from 1-based ``(i, j, theta)`` triples."""
        triples = list(pairs)
        if not triples:
            empty = np.zeros(0)
            return cls(empty, empty, empty, overlapping)
        i, j, theta = zip(*triples)
        return cls(np.asarray(i) - 1, np.asarray(j) - 1, np.asarray(theta, float), overlapping)

    @property
    def pairs(self) -> list[tuple[int, int, float]]:
        """1-based ``(i, j, theta)`` triples."""
        return [
            (int(i) + 1, int(j) + 1, float(t))
            for i, j, t in zip(self.first, self.second, self.theta)
        ]

    def __len__(self) -> int:
        return int(self.theta.size)

    def inverse(self) -> "GivensPlan":
        """The plan undoing this one (negated angles, reversed order)."""
        return GivensPlan(
            self.first[::-1], self.second[::-1], -self.theta[::-1], self.overlapping
        )


@numba.njit(cache=True)
def _rotate_columns(m, first, second, c, s):
    # Row-outer loop keeps memory access contiguous for row-major operands.
    for r in range(m.shape[0]):
        for k in range(first.shape[0]):
            i = first[k]
            j = second[k]
            a = m[r, i]
            b = m[r, j]
            m[r, i] = a * c[k] + b * s[k]
            m[r, j] = b * c[k] - a * s[k]


def givens_apply_right_(m: np.ndarray, plan: GivensPlan) -> np.ndarray:
    """In-place version of :func:`givens_apply_right`.

    ``m`` must be a C-contiguous float64 array; it is returned for chaining.
    """
    if m.dtype != np.float64 or not m.flags.c_contiguous or m.ndim != 2:
        raise TypeError("in-place Givens update needs a C-contiguous float64 matrix")
    if len(plan) and int(plan.second.max()) >= m.shape[1]:
        raise IndexError(
            f"axis {int(plan.second.max()) + 1} out of range for n={m.shape[1]}"
        )
    _rotate_columns(m, plan.first, plan.second, np.cos(plan.theta), np.sin(plan.theta))
    return m


def givens_apply_right(m, plan: GivensPlan) -> np.ndarray:
    """Return ``m @ R_{i1 j1}(t1) @ R_{i2 j2}(t2) @ ...`` for the rotations in ``plan``.

    For each pair the columns are updated as
    ``c_i, c_j <- c_i cos t + c_j sin t, -c_i sin t + c_j cos t``, which is
    right-multiplication by the rotation with ``-sin t`` at entry ``(i, j)``
    and ``+sin t`` at ``(j, i)``.
    """
    out = as_matrix(m, "m").copy()
    return givens_apply_right_(out, plan)


def givens_matrix(n: int, i: int, j: int, theta: float) -> np.ndarray:
    """Dense ``n x n`` rotation ``R_ij(theta)`` for 1-based ``i < j``."""
    if not 1 <= i < j <= n:
        raise IndexError(f"invalid pair ({i}, {j}) for n={n}")
    r = np.eye(n)
    c, s = np.cos(theta), np.sin(theta)
    r[i - 1, i - 1] = c
    r[i - 1, j - 1] = -s
    r[j - 1, i - 1] = s
    r[j - 1, j - 1] = c
    return r


def svd(m) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Singular value decomposition ``M = U diag(S) V^T`` of a square matrix.

    Returns ``(U, S, V)`` with ``S`` non-negative and descending. Backed by
    LAPACK's divide-and-conquer driver.
    """
    m = as_matrix(m, "M", square=True)
    try:
        u, s, vt = np.linalg.svd(m)
    except np.linalg.LinAlgError as exc:
        raise SVDConvergenceError(f"SVD did not converge for {m.shape} input") from exc
    return u, s, vt.T


def procrustes(c, special: bool = True) -> np.ndarray:
    """Orthogonal matrix maximizing ``<C, Q>``.

    With ``special=True`` the maximizer is restricted to SO(n): if ``U V^T``
    has determinant -1 the last column of ``U`` (smallest singular value)
    is negated first.
    """
    u, _, v = svd(c)
    if special and np.linalg.det(u @ v.T) < 0:
        u = u.copy()
        u[:, -1] = -u[:, -1]
    return u @ v.T


def orthonormality_defect(r) -> float:
    """Frobenius norm of ``R^T R - I``."""
    r = as_matrix(r, "R", square=True)
    return float(np.linalg.norm(r.T @ r - np.eye(r.shape[0])))


def reorthonormalize(r) -> np.ndarray:
    """Nearest rotation to ``r`` in Frobenius norm."""
    return procrustes(r, special=True)


def random_rotation(n: int, rng: np.random.Generator | int | None = None) -> np.ndarray:
    """Haar-distributed element of SO(n)."""
    rng = np.random.default_rng(rng)
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


@dataclass
class RotationState:
    """An element of SO(n) together with step bookkeeping.

    ``defect`` is the last measured value of ``||R^T R - I||_F``;
    ``reorth_count`` counts how often drift repair has fired and
    ``since_reorth`` the steps taken since the last repair.
    """

    R: np.ndarray
    steps_applied: int = 0
    defect: float = field(default=float("nan"))
    reorth_count: int = 0
    since_reorth: int = 0

    def __post_init__(self):
        self.R = as_matrix(self.R, "R", square=True)
        if not np.isnan(self.defect):
            # Produced by an update that already measured (or skipped) the defect.
            return
        self.defect = orthonormality_defect(self.R)
        if self.defect > DEFECT_THRESHOLD:
            raise ValueError(f"R is not orthonormal (defect {self.defect:.3g})")
        if abs(np.linalg.det(self.R) - 1.0) > 1e-6:
            raise ValueError("R must have determinant +1")

    @classmethod
    def identity(cls, n: int) -> "RotationState":
        return cls(np.eye(n), defect=0.0)

    @property
    def n(self) -> int:
        return self.R.shape[0]

    def advanced(self, r: np.ndarray, steps: int = 1, check: bool = True) -> "RotationState":
        """New state holding ``r`` after ``steps`` more updates.

        When ``check`` is set the defect is remeasured and drift repair runs
        if it exceeds :data:`DEFECT_THRESHOLD`; repair also runs every
        :data:`REORTH_PERIOD` steps regardless.
        """
        since = self.since_reorth + steps
        defect = orthonormality_defect(r) if check else self.defect
        count = self.reorth_count
        if defect > DEFECT_THRESHOLD or since >= REORTH_PERIOD:
            r = reorthonormalize(r)
            defect = orthonormality_defect(r)
            count += 1
            since = 0
        return RotationState(r, self.steps_applied + steps, defect, count, since)


def plan_from_sequence(
    first: Sequence[int], second: Sequence[int], theta: Sequence[float], overlapping: bool = False
) -> GivensPlan:
    """Plan from 0-based axis arrays, swapping each pair so that ``i < j``."""
    a = np.asarray(first, dtype=np.int64)
    b = np.asarray(second, dtype=np.int64)
    return GivensPlan(np.minimum(a, b), np.maximum(a, b), np.asarray(theta, float), overlapping)
