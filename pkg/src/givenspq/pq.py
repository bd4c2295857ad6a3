"""Product quantization: codebook training, encoding and ADC search."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix


def _sq_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # ||p||^2 - 2 p.c + ||c||^2, clipped at zero against cancellation.
    d = (
        np.einsum("ij,ij->i", points, points)[:, None]
        - 2.0 * points @ centroids.T
        + np.einsum("ij,ij->i", centroids, centroids)[None, :]
    )
    return np.maximum(d, 0.0)


def nearest(points: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Index of and squared distance to the nearest centroid for each point.

    Ties go to the lowest index.
    """
    d = _sq_distances(points, centroids)
    idx = np.argmin(d, axis=1)
    return idx, d[np.arange(len(points)), idx]


def kmeans_plusplus(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding (D^2 sampling)."""
    m = len(points)
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(m)]
    closest = _sq_distances(points, centers[:1])[:, 0]
    for c in range(1, k):
        total = closest.sum()
        if total > 0:
            pick = rng.choice(m, p=closest / total)
        else:
            # fewer distinct points than k; the codebook will be degenerate
            pick = rng.integers(m)
        centers[c] = points[pick]
        closest = np.minimum(closest, _sq_distances(points, centers[c : c + 1])[:, 0])
    return centers


def lloyd(
    points, centroids, max_iters: int = 25
) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Lloyd iterations from the given centroids.

    Returns ``(centroids, assignments, history)`` where ``history`` holds the
    within-cluster sum of squares after each assignment step. It never
    increases. Iteration stops at an assignment fixpoint or after
    ``max_iters`` assignment steps; clusters left empty are moved onto the
    point farthest from its centroid.
    """
    points = as_matrix(points, "points")
    centroids = np.array(centroids, dtype=np.float64)
    k = len(centroids)
    history: list[float] = []
    assign = None
    for _ in range(max(max_iters, 1)):
        new_assign, dist = nearest(points, centroids)
        history.append(float(dist.sum()))
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        counts = np.bincount(assign, minlength=k)
        sums = np.stack(
            [np.bincount(assign, weights=col, minlength=k) for col in points.T], axis=1
        )
        filled = counts > 0
        centroids[filled] = sums[filled] / counts[filled, None]
        if not filled.all():
            order = np.argsort(-dist, kind="stable")
            for c, p in zip(np.flatnonzero(~filled), order):
                centroids[c] = points[p]
    assign, _ = nearest(points, centroids)
    return centroids, assign, history


def kmeans(points, K: int, max_iters: int = 25, seed=0) -> np.ndarray:
    """K centroids by k-means++ seeding followed by Lloyd iterations."""
    points = as_matrix(points, "points")
    if K < 1:
        raise ValueError(f"K must be positive, got {K}")
    if len(points) < K:
        raise ValueError(f"need at least K={K} points, got {len(points)}")
    rng = np.random.default_rng(seed)
    centers = kmeans_plusplus(points, K, rng)
    return lloyd(points, centers, max_iters)[0]


@dataclass
class PQCodebook:
    """``D`` codebooks of ``K`` centroids, stored as a ``(D, K, n/D)`` array."""

    centroids: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.centroids, dtype=np.float64)
        if c.ndim != 3:
            raise ValueError(f"centroids must have shape (D, K, subdim), got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("centroids must be finite")
        self.centroids = c

    @property
    def D(self) -> int:
        return self.centroids.shape[0]

    @property
    def K(self) -> int:
        return self.centroids.shape[1]

    @property
    def subdim(self) -> int:
        return self.centroids.shape[2]

    @property
    def n(self) -> int:
        return self.D * self.subdim

    @property
    def degenerate(self) -> bool:
        """True when two centroids of one subspace coincide within 1e-12."""
        for book in self.centroids:
            d = _sq_distances(book, book)
            np.fill_diagonal(d, np.inf)
            if np.any(np.sqrt(d) <= 1e-12):
                return True
        return False

    def subspace(self, i: int) -> slice:
        return slice(i * self.subdim, (i + 1) * self.subdim)


def _subspace_seeds(seed, D: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(D)


def pq_train(
    X, D: int, K: int, seed=0, max_iters: int = 25, init: PQCodebook | None = None
) -> PQCodebook:
    """Train one k-means codebook per contiguous block of ``n / D`` columns.

    Subspace ``i`` is seeded with the ``i``-th child of
    ``SeedSequence(seed)``. With ``init`` the Lloyd iterations start from
    the given centroids instead of k-means++ seeds.
    """
    X = as_matrix(X, "X")
    n = X.shape[1]
    if D < 1 or n % D:
        raise ValueError(f"dimension {n} is not divisible by D={D}")
    if len(X) < K:
        raise ValueError(f"need at least K={K} vectors, got {len(X)}")
    sub = n // D
    if init is not None and (init.D, init.K, init.subdim) != (D, K, sub):
        raise ValueError("warm-start codebook does not match (D, K, n/D)")
    books = np.empty((D, K, sub))
    for i, ss in enumerate(_subspace_seeds(seed, D)):
        block = X[:, i * sub : (i + 1) * sub]
        if init is None:
            books[i] = kmeans(block, K, max_iters, np.random.default_rng(ss))
        else:
            books[i] = lloyd(block, init.centroids[i], max_iters)[0]
    return PQCodebook(books)


def _check_dim(X: np.ndarray, cb: PQCodebook) -> None:
    if X.shape[1] != cb.n:
        raise ValueError(f"vectors have dimension {X.shape[1]}, codebook expects {cb.n}")


def pq_encode(X, cb: PQCodebook) -> np.ndarray:
    """Nearest-centroid code per subspace, as an ``(m, D)`` integer array."""
    X = as_matrix(X, "X")
    _check_dim(X, cb)
    codes = np.empty((len(X), cb.D), dtype=np.int64)
    for i in range(cb.D):
        codes[:, i] = nearest(X[:, cb.subspace(i)], cb.centroids[i])[0]
    return codes


def pq_decode(codes, cb: PQCodebook) -> np.ndarray:
    """Concatenate the centroids selected by ``codes``."""
    codes = np.asarray(codes)
    if codes.ndim != 2 or codes.shape[1] != cb.D:
        raise ValueError(f"codes must have shape (m, {cb.D}), got {codes.shape}")
    if codes.size and (codes.min() < 0 or codes.max() >= cb.K):
        raise IndexError("code out of range")
    out = np.empty((len(codes), cb.n))
    for i in range(cb.D):
        out[:, cb.subspace(i)] = cb.centroids[i][codes[:, i]]
    return out


def quantize(X, cb: PQCodebook) -> np.ndarray:
    """``decode(encode(X))``."""
    return pq_decode(pq_encode(X, cb), cb)


def distortion(X, Xq) -> float:
    """Mean over rows of the squared Euclidean distance between ``X`` and ``Xq``."""
    X = np.asarray(X, dtype=np.float64)
    Xq = np.asarray(Xq, dtype=np.float64)
    if X.shape != Xq.shape:
        raise ValueError(f"shape mismatch: {X.shape} vs {Xq.shape}")
    if len(X) == 0:
        return 0.0
    return float(np.sum((X - Xq) ** 2) / len(X))


def adc_tables(queries, R, cb: PQCodebook) -> np.ndarray:
    """Per-query lookup tables of shape ``(q, D, K)``.

    Entry ``[a, i, c]`` is the squared distance between subvector ``i`` of
    the rotated query ``a`` and centroid ``c`` of subspace ``i``.
    """
    Q = as_matrix(queries, "queries") @ as_matrix(R, "R", square=True)
    _check_dim(Q, cb)
    tables = np.empty((len(Q), cb.D, cb.K))
    for i in range(cb.D):
        tables[:, i, :] = _sq_distances(Q[:, cb.subspace(i)], cb.centroids[i])
    return tables


def adc_distances(queries, R, cb: PQCodebook, codes) -> np.ndarray:
    """Asymmetric distances ``||q R - phi(b R)||^2`` as a ``(q, m)`` array."""
    tables = adc_tables(queries, R, cb)
    codes = np.asarray(codes)
    out = np.zeros((tables.shape[0], len(codes)))
    for i in range(cb.D):
        out += tables[:, i, codes[:, i]]
    return out


def exact_neighbors(queries, base, k: int = 1) -> np.ndarray:
    """Indices of the ``k`` nearest base vectors per query (squared L2)."""
    queries = as_matrix(queries, "queries")
    base = as_matrix(base, "base")
    d = _sq_distances(queries, base)
    idx = np.argsort(d, axis=1, kind="stable")
    return idx[:, :k]


def adc_eval(queries, base, R, cb: PQCodebook, k: int, ground_truth=None) -> float:
    """Recall@k of asymmetric distance search.

    The fraction of queries whose true nearest neighbour (exact squared L2,
    or ``ground_truth[:, 0]`` when given) is among the ``k`` base vectors
    with the smallest ADC distance.
    """
    base = as_matrix(base, "base")
    queries = as_matrix(queries, "queries")
    m = len(base)
    if not 1 <= k <= m:
        raise ValueError(f"k must be in [1, {m}], got {k}")
    if queries.shape[1] != base.shape[1]:
        raise ValueError("queries and base differ in dimension")
    if ground_truth is None:
        truth = exact_neighbors(queries, base, 1)[:, 0]
    else:
        truth = np.asarray(ground_truth)[:, 0]
    codes = pq_encode(base @ as_matrix(R, "R", square=True), cb)
    d = adc_distances(queries, R, cb, codes)
    if k == m:
        return 1.0
    top = np.argpartition(d, k - 1, axis=1)[:, :k]
    hits = np.any(top == truth[:, None], axis=1)
    return float(hits.mean())
