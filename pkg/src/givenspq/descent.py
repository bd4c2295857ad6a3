"""Givens coordinate descent on SO(n).

One step computes the normalized directional derivatives of the loss along
every Givens direction, selects a set of axis pairs, and rotates ``R`` on
the right by ``R_ij(-lr * g_ij)`` for each selected pair.

Pair selection comes in five flavours:

* ``random``: a uniformly random perfect matching (shuffle and pair up).
* ``greedy``: repeatedly take the feasible pair with the largest ``g_ij**2``.
* ``steepest``: maximum-weight perfect matching with weights ``g_ij**2``.
* ``overlapping-greedy`` / ``overlapping-random``: ablations that drop the
  disjointness requirement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import networkx as nx
import numba
import numpy as np

from .linalg import GivensPlan, RotationState, _rotate_columns, as_matrix, givens_apply_right_

SQRT2 = math.sqrt(2.0)

KINDS = ("random", "greedy", "steepest", "overlapping-greedy", "overlapping-random")
RANDOM_KINDS = ("random", "overlapping-random")

#: Largest dimension accepted by the exact matching solver by default.
STEEPEST_MAX_DIM = 64


@dataclass(frozen=True)
class SelectionStrategy:
    kind: str = "greedy"
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown selection strategy {self.kind!r}; expected one of {KINDS}")
        if self.is_random and self.seed is None:
            raise ValueError(f"strategy {self.kind!r} requires a seed")
        if not self.is_random and self.seed is not None:
            raise ValueError(f"strategy {self.kind!r} does not take a seed")

    @property
    def is_random(self) -> bool:
        return self.kind in RANDOM_KINDS

    @property
    def overlapping(self) -> bool:
        return self.kind.startswith("overlapping")


@dataclass(frozen=True)
class Matching:
    """Selected axis pairs, 1-based with ``i < j``."""

    pairs: tuple[tuple[int, int], ...]
    mode: str = "disjoint"

    def __post_init__(self):
        pairs = tuple((int(i), int(j)) for i, j in self.pairs)
        if any(i >= j or i < 1 for i, j in pairs):
            raise ValueError("pairs must be 1-based with i < j")
        if self.mode not in ("disjoint", "overlapping"):
            raise ValueError(f"unknown matching mode {self.mode!r}")
        if self.mode == "disjoint":
            axes = [a for p in pairs for a in p]
            if len(set(axes)) != len(axes):
                raise ValueError("disjoint matching repeats an axis")
        object.__setattr__(self, "pairs", pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return iter(self.pairs)

    @property
    def first(self) -> np.ndarray:
        return np.array([i - 1 for i, _ in self.pairs], dtype=np.int64)

    @property
    def second(self) -> np.ndarray:
        return np.array([j - 1 for _, j in self.pairs], dtype=np.int64)

    def weight(self, d: np.ndarray) -> float:
        """Sum of ``g_ij**2`` over the pairs, for a derivative matrix ``d``."""
        return float(np.sum(np.asarray(d)[self.first, self.second] ** 2))


def directional_derivatives(r, g) -> np.ndarray:
    """Normalized directional derivatives ``(G^T R - R^T G) / sqrt(2)``.

    Entry ``(i, j)`` is the rate of change of the loss along
    ``theta -> R @ R_ij(theta)`` at ``theta = 0``, divided by
    ``||R_ij'(0)||_F = sqrt(2)``. ``g`` is the Euclidean gradient of the
    loss with respect to ``R``. The result is exactly antisymmetric.
    """
    r = as_matrix(r, "R", square=True)
    g = as_matrix(g, "G", square=True)
    if r.shape != g.shape:
        raise ValueError(f"shape mismatch: R {r.shape} vs G {g.shape}")
    m = g.T @ r
    return (m - m.T) / SQRT2


@numba.njit(cache=True)
def _pair_derivatives(r, g, first, second):
    out = np.zeros(first.shape[0])
    for row in range(r.shape[0]):
        for k in range(first.shape[0]):
            i = first[k]
            j = second[k]
            out[k] += g[row, i] * r[row, j] - r[row, i] * g[row, j]
    return out


def pair_derivatives(r: np.ndarray, g: np.ndarray, first: np.ndarray, second: np.ndarray) -> np.ndarray:
    """Entries ``(first[k], second[k])`` of :func:`directional_derivatives` only.

    Costs ``O(n)`` per pair instead of ``O(n^3)`` for the full matrix;
    ``r`` and ``g`` must already be C-contiguous float64.
    """
    return _pair_derivatives(r, g, first, second) / SQRT2


@numba.njit(cache=True)
def _random_update(r, g, first, second, lr):
    # Fused GCD-R step: selected derivatives, angles and the rotated copy.
    theta = -lr * (_pair_derivatives(r, g, first, second) / SQRT2)
    out = r.copy()
    _rotate_columns(out, first, second, np.cos(theta), np.sin(theta))
    return out


def _check_dim(n: int) -> None:
    if n < 2:
        raise ValueError(f"need at least 2 axes, got n={n}")


def _random_pairs(n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    # 0-based (first, second) arrays of a shuffled consecutive pairing.
    perm = rng.permutation(n)
    half = n // 2
    a, b = perm[0 : 2 * half : 2], perm[1 : 2 * half : 2]
    return np.minimum(a, b), np.maximum(a, b)


def select_pairs_random(n: int, seed: int | np.random.Generator) -> Matching:
    """Shuffle ``1..n`` and pair consecutive entries.

    Odd ``n`` leaves the last shuffled axis unmatched.
    """
    _check_dim(n)
    first, second = _random_pairs(n, np.random.default_rng(seed))
    return Matching(tuple(zip((first + 1).tolist(), (second + 1).tolist())))


def _ranked_pairs(d: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # All i < j pairs by descending g**2, ties in lexicographic (i, j) order.
    n = d.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    w = d[iu, ju] ** 2
    order = np.lexsort((ju, iu, -w))
    return iu[order], ju[order], w[order]


def _derivative_matrix(d) -> np.ndarray:
    d = np.asarray(d, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError(f"derivative matrix must be square, got {d.shape}")
    _check_dim(d.shape[0])
    return d


def select_pairs_greedy(d) -> Matching:
    """Greedy bipartite matching on the weights ``g_ij**2``.

    Repeatedly takes the remaining pair with the largest weight among axes
    not yet used. Walking the globally sorted list and skipping infeasible
    pairs is equivalent and costs ``O(n^2 log n)``.
    """
    d = _derivative_matrix(d)
    n = d.shape[0]
    used = np.zeros(n, dtype=bool)
    pairs = []
    for i, j in zip(*_ranked_pairs(d)[:2]):
        if used[i] or used[j]:
            continue
        used[i] = used[j] = True
        pairs.append((int(i) + 1, int(j) + 1))
        if len(pairs) == n // 2:
            break
    return Matching(tuple(pairs))


def select_pairs_steepest(d, max_dim: int = STEEPEST_MAX_DIM) -> Matching:
    """Maximum-weight perfect matching on the weights ``g_ij**2``.

    Uses the blossom algorithm on the complete graph, asking for maximum
    cardinality so that exactly ``n // 2`` pairs come back even when some
    weights are zero.
    """
    d = _derivative_matrix(d)
    n = d.shape[0]
    if n > max_dim:
        raise ValueError(
            f"steepest selection is capped at n={max_dim} (got n={n}); "
            "use the greedy strategy for larger dimensions"
        )
    graph = nx.Graph()
    graph.add_nodes_from(range(n))
    iu, ju = np.triu_indices(n, k=1)
    w = d[iu, ju] ** 2
    graph.add_weighted_edges_from(zip(iu.tolist(), ju.tolist(), w.tolist()))
    mate = nx.max_weight_matching(graph, maxcardinality=True)
    pairs = sorted((min(a, b) + 1, max(a, b) + 1) for a, b in mate)
    return Matching(tuple(pairs))


def perfect_matchings(axes: list[int]) -> Iterator[list[tuple[int, int]]]:
    """Enumerate all perfect matchings of an even-sized list of axes."""
    if not axes:
        yield []
        return
    head, rest = axes[0], axes[1:]
    for k, other in enumerate(rest):
        for tail in perfect_matchings(rest[:k] + rest[k + 1 :]):
            yield [(head, other)] + tail


def select_pairs_exhaustive(d, max_dim: int = 10) -> Matching:
    """Exact maximum-weight matching by enumeration, for small ``n`` only.

    For odd ``n`` every choice of unmatched axis is tried. The first
    optimum in enumeration order wins.
    """
    d = _derivative_matrix(d)
    n = d.shape[0]
    if n > max_dim:
        raise ValueError(f"exhaustive matching is limited to n <= {max_dim}")
    w = d**2
    best, best_w = None, -np.inf
    drops = [None] if n % 2 == 0 else list(range(n))
    for drop in drops:
        axes = [a for a in range(n) if a != drop]
        for m in perfect_matchings(axes):
            total = sum(w[i, j] for i, j in m)
            if total > best_w:
                best, best_w = m, total
    return Matching(tuple(sorted((i + 1, j + 1) for i, j in best)))


def select_pairs_overlapping(d, base: str = "greedy", seed=None) -> Matching:
    """``n // 2`` pairs without the disjointness constraint.

    The greedy base keeps the pairs with the globally largest ``g_ij**2``
    in descending order; the random base samples pairs uniformly without
    replacement, in draw order.
    """
    d = _derivative_matrix(d)
    n = d.shape[0]
    k = n // 2
    if base == "greedy":
        iu, ju, _ = _ranked_pairs(d)
        chosen = list(zip(iu[:k], ju[:k]))
    elif base == "random":
        if seed is None:
            raise ValueError("random base requires a seed")
        rng = np.random.default_rng(seed)
        iu, ju = np.triu_indices(n, k=1)
        idx = rng.choice(iu.size, size=k, replace=False)
        chosen = list(zip(iu[idx], ju[idx]))
    else:
        raise ValueError(f"unknown overlapping base {base!r}")
    return Matching(tuple((int(i) + 1, int(j) + 1) for i, j in chosen), mode="overlapping")


def select_pairs(d, strategy: SelectionStrategy, rng=None) -> Matching:
    """Dispatch to the selector named by ``strategy``.

    ``rng`` overrides the strategy seed for the random kinds.
    """
    source = strategy.seed if rng is None else rng
    if strategy.kind == "random":
        return select_pairs_random(np.asarray(d).shape[0], source)
    if strategy.kind == "greedy":
        return select_pairs_greedy(d)
    if strategy.kind == "steepest":
        return select_pairs_steepest(d)
    if strategy.kind == "overlapping-greedy":
        return select_pairs_overlapping(d, "greedy")
    return select_pairs_overlapping(d, "random", source)


def step_rng(strategy: SelectionStrategy, step: int) -> np.random.Generator | None:
    """Generator for the draw at ``step``; a pure function of seed and step."""
    if not strategy.is_random:
        return None
    return np.random.default_rng([strategy.seed, step])


def propose_plan(
    r: np.ndarray, g: np.ndarray, strategy: SelectionStrategy, lr: float, rng=None
) -> GivensPlan:
    """Select pairs and angles ``-lr * g_ij`` for one descent step.

    For the plain random strategy only the selected derivatives are
    computed, which keeps the step at ``O(n^2)``.
    """
    if not lr > 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    r = as_matrix(r, "R", square=True)
    g = as_matrix(g, "G", square=True)
    if r.shape != g.shape:
        raise ValueError(f"shape mismatch: R {r.shape} vs G {g.shape}")
    if strategy.kind == "random":
        _check_dim(r.shape[0])
        first, second = _random_pairs(r.shape[0], np.random.default_rng(strategy.seed if rng is None else rng))
        return GivensPlan.trusted(first, second, -lr * pair_derivatives(r, g, first, second))
    d = directional_derivatives(r, g)
    matching = select_pairs(d, strategy, rng)
    first, second = matching.first, matching.second
    return GivensPlan(first, second, -lr * d[first, second], overlapping=matching.mode == "overlapping")


def gcd_step(
    state: RotationState,
    g,
    strategy: SelectionStrategy,
    lr: float,
    *,
    check: bool = True,
) -> RotationState:
    """One iteration of Givens coordinate descent.

    Random strategies draw from a generator seeded by
    ``(strategy.seed, state.steps_applied)``, so the result is a pure
    function of the inputs. ``check=False`` skips the ``O(n^3)`` defect
    measurement for this step.
    """
    if strategy.kind == "random":
        if not lr > 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        g = as_matrix(g, "G", square=True)
        if g.shape != state.R.shape:
            raise ValueError(f"shape mismatch: R {state.R.shape} vs G {g.shape}")
        _check_dim(g.shape[0])
        first, second = _random_pairs(g.shape[0], step_rng(strategy, state.steps_applied))
        return state.advanced(_random_update(state.R, g, first, second, lr), check=check)
    plan = propose_plan(state.R, g, strategy, lr, step_rng(strategy, state.steps_applied))
    r = givens_apply_right_(state.R.copy(), plan)
    return state.advanced(r, check=check)


def matching_count(n: int) -> int:
    """Number of perfect matchings of ``n`` (even) axes, ``(n - 1)!!``."""
    return math.prod(range(n - 1, 0, -2))
