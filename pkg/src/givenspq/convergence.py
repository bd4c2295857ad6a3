"""Convex test objectives on SO(n) and convergence diagnostics.

The dot objective ``L(R) = <w, R x>`` and its cosine variant have the
closed-form minimum ``-||w|| ||x||`` (resp. ``-1``) for ``n >= 2``, which
makes them convenient for checking that descent actually converges and
that the observed optimality gap respects the sub-linear rate bound

    gap_k <= 1 / (k / (D_n^2 (n - 1) eta) + 1 / gap_0),   D_n = n * pi.

Lipschitz constants are estimated along block Givens directions, where the
exponential map is exact and cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cayley import CayleyState, cayley_step
from .descent import (
    SelectionStrategy,
    directional_derivatives,
    gcd_step,
    select_pairs_greedy,
    select_pairs_random,
)
from .linalg import GivensPlan, RotationState, as_matrix, givens_apply_right, procrustes

OBJECTIVE_KINDS = ("dot", "cosine", "fixed-code-distortion")
#: Safety factor applied to the sampled Lipschitz estimate before use as 1/lr.
LIPSCHITZ_INFLATION = 1.5


@dataclass
class ConvexObjective:
    """A loss on SO(n) with a known gradient.

    ``dot``: ``<w, R x>``; ``cosine``: the same divided by ``||w|| ||x||``;
    ``fixed-code-distortion``: ``(1/m) ||X R - C||^2`` with targets ``C``.
    """

    kind: str
    w: np.ndarray | None = None
    x: np.ndarray | None = None
    X: np.ndarray | None = None
    C: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in OBJECTIVE_KINDS:
            raise ValueError(f"unknown objective kind {self.kind!r}")
        if self.kind in ("dot", "cosine"):
            if self.w is None or self.x is None:
                raise ValueError(f"{self.kind} objective needs w and x")
            self.w = np.asarray(self.w, dtype=np.float64).ravel()
            self.x = np.asarray(self.x, dtype=np.float64).ravel()
            if self.w.shape != self.x.shape:
                raise ValueError("w and x must have the same length")
            if not np.any(self.w) or not np.any(self.x):
                raise ValueError("w and x must be nonzero")
        else:
            if self.X is None or self.C is None:
                raise ValueError("distortion objective needs X and C")
            self.X = as_matrix(self.X, "X")
            self.C = as_matrix(self.C, "C")
            if self.X.shape != self.C.shape:
                raise ValueError("X and C must have the same shape")

    @property
    def n(self) -> int:
        return self.w.size if self.w is not None else self.X.shape[1]

    @property
    def scale(self) -> float:
        """``||w|| ||x||`` for dot objectives, 1 otherwise."""
        if self.kind == "dot":
            return float(np.linalg.norm(self.w) * np.linalg.norm(self.x))
        return 1.0

    @classmethod
    def random_dot(cls, n: int, seed=0, unit: bool = False, kind: str = "dot") -> "ConvexObjective":
        rng = np.random.default_rng(seed)
        w, x = rng.standard_normal(n), rng.standard_normal(n)
        if unit:
            w, x = w / np.linalg.norm(w), x / np.linalg.norm(x)
        return cls(kind, w=w, x=x)


def objective_value(obj: ConvexObjective, r) -> float:
    r = np.asarray(r, dtype=np.float64)
    if obj.kind == "fixed-code-distortion":
        return float(np.sum((obj.X @ r - obj.C) ** 2) / len(obj.X))
    v = float(obj.w @ r @ obj.x)
    if obj.kind == "cosine":
        v /= float(np.linalg.norm(obj.w) * np.linalg.norm(obj.x))
    return v


def objective_eval(obj: ConvexObjective, r) -> tuple[float, np.ndarray]:
    """Value and Euclidean gradient with respect to ``R``."""
    r = as_matrix(r, "R", square=True)
    if r.shape[0] != obj.n:
        raise ValueError(f"R has dimension {r.shape[0]}, objective expects {obj.n}")
    if obj.kind == "fixed-code-distortion":
        resid = obj.X @ r - obj.C
        return float(np.sum(resid**2) / len(obj.X)), (2.0 / len(obj.X)) * obj.X.T @ resid
    grad = np.outer(obj.w, obj.x)
    value = float(obj.w @ r @ obj.x)
    if obj.kind == "cosine":
        norm = float(np.linalg.norm(obj.w) * np.linalg.norm(obj.x))
        value, grad = value / norm, grad / norm
    return value, grad


def analytic_minimum(obj: ConvexObjective) -> float:
    """Minimum over SO(n), n >= 2: ``-||w|| ||x||`` (dot) or ``-1`` (cosine)."""
    if obj.kind == "dot":
        return -obj.scale
    if obj.kind == "cosine":
        return -1.0
    raise ValueError(f"no closed-form minimum for {obj.kind!r} objectives")


def analytic_argmin(obj: ConvexObjective) -> np.ndarray:
    """A rotation attaining :func:`analytic_minimum` (maps ``x`` onto ``-w``)."""
    if obj.kind not in ("dot", "cosine"):
        raise ValueError(f"no closed-form minimizer for {obj.kind!r} objectives")
    # maximize <-w x^T, R> over SO(n)
    return procrustes(-np.outer(obj.w, obj.x))


def block_direction(plan: GivensPlan, n: int) -> np.ndarray:
    """The tangent vector ``g`` with ``exp(g) = product of the plan's rotations``."""
    g = np.zeros((n, n))
    g[plan.second, plan.first] = plan.theta
    g[plan.first, plan.second] = -plan.theta
    return g


def _probe_block(n: int, rng: np.random.Generator) -> GivensPlan:
    # Few pairs and small angles expose the peak curvature; full blocks
    # and large angles average it away.
    m = select_pairs_random(n, rng)
    k = int(rng.integers(1, len(m) + 1))
    theta = rng.choice([-1.0, 1.0], k) * 10 ** rng.uniform(-3, math.log10(math.pi), k)
    return GivensPlan(m.first[:k], m.second[:k], theta)


def sublevel_path(obj: ConvexObjective, G0, steps: int = 50) -> list[np.ndarray]:
    """Points of ``{L <= L(G0)}`` visited by a backtracking greedy descent.

    Each step rotates the greedy pairs by angles proportional to their
    derivatives, the largest being ``t`` radians, and halves ``t`` until
    the loss decreases. No smoothness constant is needed.
    """
    R = as_matrix(G0, "G0", square=True)
    path = [R]
    value, grad = objective_eval(obj, R)
    t = 1.0
    for _ in range(steps):
        d = directional_derivatives(R, grad)
        m = select_pairs_greedy(d)
        g = d[m.first, m.second]
        top = float(np.max(np.abs(g)))
        if top == 0.0:
            break
        while t > 1e-8:
            cand = givens_apply_right(R, GivensPlan(m.first, m.second, -t * g / top))
            new = objective_value(obj, cand)
            if new < value:
                break
            t /= 2
        else:
            break
        R, t = cand, min(2 * t, math.pi / 2)
        value, grad = objective_eval(obj, R)
        path.append(R)
    return path


def estimate_lipschitz(obj: ConvexObjective, G0, samples: int = 200, seed=0) -> float:
    """Largest sampled curvature quotient along block Givens geodesics.

    Base points ``G`` cycle through :func:`sublevel_path` from ``G0``. At
    each a block direction ``g`` on a random number of disjoint pairs, with
    log-uniform angle magnitudes in ``[1e-3, pi]``, is drawn and

        2 (L(G exp(g)) - L(G) - <grad L(G), G g>) / ||g||^2

    is evaluated. Restricting ``g`` to maximal-torus directions makes this a
    lower-bound estimate of the constant on the sublevel set.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    G0 = as_matrix(G0, "G0", square=True)
    n = G0.shape[0]
    rng = np.random.default_rng(seed)
    path = sublevel_path(obj, G0)
    best = 0.0
    for s in range(samples):
        base = path[s % len(path)]
        value, grad = objective_eval(obj, base)
        step = _probe_block(n, rng)
        g = block_direction(step, n)
        moved = objective_value(obj, givens_apply_right(base, step))
        first_order = float(np.sum(grad * (base @ g)))
        best = max(best, 2.0 * (moved - value - first_order) / float(np.sum(g * g)))
    return max(best, np.finfo(float).tiny)


def theorem_bound(k, gap0: float, n: int, eta: float) -> np.ndarray:
    """``1 / (k / (D_n^2 (n-1) eta) + 1 / gap0)`` with ``D_n = n pi``."""
    k = np.asarray(k, dtype=np.float64)
    diameter = n * math.pi
    if gap0 <= 0:
        return np.zeros_like(k)
    return 1.0 / (k / (diameter**2 * (n - 1) * eta) + 1.0 / gap0)


@dataclass
class ConvergenceReport:
    final_gap: float
    iterations: int
    eta: float
    diameter: float
    converged: bool
    steps: list[int] = field(default_factory=list)
    gaps: list[float] = field(default_factory=list)
    bounds: list[float] = field(default_factory=list)
    violations: list[int] = field(default_factory=list)

    @property
    def within_bound(self) -> bool:
        return not self.violations


def convergence_run(
    obj: ConvexObjective,
    strategy: SelectionStrategy | None,
    lr: float,
    max_iters: int = 5000,
    tol: float | None = 1e-3,
    seed=0,
    *,
    method: str = "gcd",
    R0=None,
    eta: float | None = None,
    log_every: int = 1,
) -> ConvergenceReport:
    """Descend from ``R0`` (identity by default) until the gap is below ``tol * |L*|``.

    ``method`` is ``"gcd"`` (with ``strategy``) or ``"cayley"``. The bound is
    evaluated with ``eta`` (estimated from ``R0`` when omitted) at every
    logged step; steps where the gap exceeds it are listed in
    ``violations``. Non-convergence is reported, not raised. ``tol=None``
    runs all ``max_iters`` steps.
    """
    target = analytic_minimum(obj)
    n = obj.n
    R0 = np.eye(n) if R0 is None else as_matrix(R0, "R0", square=True)
    if eta is None:
        eta = estimate_lipschitz(obj, R0, seed=seed)
    if tol is None:
        threshold = -math.inf
    else:
        threshold = tol * abs(target) if target else tol
    gap0 = objective_value(obj, R0) - target
    report = ConvergenceReport(
        final_gap=gap0, iterations=0, eta=eta, diameter=n * math.pi, converged=gap0 < threshold
    )

    def log(k: int, gap: float) -> None:
        bound = float(theorem_bound(k, gap0, n, eta))
        report.steps.append(k)
        report.gaps.append(gap)
        report.bounds.append(bound)
        if gap > bound * (1 + 1e-12) + 1e-15:
            report.violations.append(k)

    log(0, gap0)
    if report.converged:
        return report
    if method == "gcd":
        if strategy is None:
            raise ValueError("gcd runs need a selection strategy")
        state = RotationState(R0)
    elif method == "cayley":
        state = CayleyState.from_rotation(R0)
    else:
        raise ValueError(f"unknown method {method!r}")
    gap = gap0
    for k in range(1, max_iters + 1):
        r = state.R
        _, grad = objective_eval(obj, r)
        if method == "gcd":
            state = gcd_step(state, grad, strategy, lr, check=False)
        else:
            state = cayley_step(state, grad, lr)
        gap = objective_value(obj, state.R) - target
        if k % log_every == 0:
            log(k, gap)
        if gap < threshold:
            report.converged = True
            break
    report.final_gap = gap
    report.iterations = k
    if report.steps[-1] != k:
        log(k, gap)
    return report


def expected_descent(obj: ConvexObjective, R, lr: float, draws: int = 1000, seed=0) -> tuple[float, float]:
    """Monte-Carlo mean descent of one random-matching step from ``R``.

    Returns ``(mean descent, ||grad||^2)`` where the second value is the
    squared norm of the Riemannian gradient, i.e. the sum over ``i < j`` of
    the squared normalized directional derivatives.
    """
    R = as_matrix(R, "R", square=True)
    value, grad = objective_eval(obj, R)
    d = directional_derivatives(R, grad)
    riem = float(np.sum(np.triu(d, 1) ** 2))
    rng = np.random.default_rng(seed)
    total = 0.0
    for _ in range(draws):
        m = select_pairs_random(obj.n, rng)
        plan = GivensPlan(m.first, m.second, -lr * d[m.first, m.second])
        total += value - objective_value(obj, givens_apply_right(R, plan))
    return total / draws, riem
