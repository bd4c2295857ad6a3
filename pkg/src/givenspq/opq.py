"""Alternating rotation / codebook training on fixed embeddings.

Each outer iteration retrains the PQ codebook on ``X R`` and then updates
``R`` with one of:

* ``svd``: the closed-form Procrustes rotation for the current codes.
* ``gcd``: a few Givens coordinate descent steps on the distortion.
* ``cayley``: a few gradient steps on the Cayley parameters.
* ``frozen``: no update (plain PQ retraining).
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field

import numpy as np

from .cayley import CayleyState, cayley_step
from .descent import SelectionStrategy, gcd_step
from .linalg import RotationState, as_matrix, procrustes
from .pq import PQCodebook, distortion, pq_decode, pq_encode, pq_train

ROTATION_MODES = ("svd", "gcd", "cayley", "frozen")


@dataclass(frozen=True)
class TrainerConfig:
    outer_iters: int = 100
    inner_steps: int = 5
    lr: float = 1e-4
    strategy: SelectionStrategy = field(default_factory=SelectionStrategy)
    rotation_mode: str = "gcd"
    seed: int = 0
    D: int = 4
    K: int = 16
    kmeans_iters: int = 10
    init_iters: int = 25
    reassign_inner: bool = False
    reset_cayley: bool = False

    def __post_init__(self):
        if self.rotation_mode not in ROTATION_MODES:
            raise ValueError(f"unknown rotation mode {self.rotation_mode!r}")
        if self.outer_iters < 0 or self.inner_steps < 1:
            raise ValueError("iteration counts must be positive")
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")
        if self.D < 1 or self.K < 1 or self.kmeans_iters < 1 or self.init_iters < 1:
            raise ValueError("D, K and k-means iteration counts must be positive")


@dataclass
class DistortionTrace:
    """Per-iteration distortion; row 0 is the state before any outer iteration.

    ``seconds`` is wall-clock time elapsed since training started.
    ``rotation`` and ``codebook`` hold the final trained model.
    """

    iterations: list[int] = field(default_factory=list)
    distortions: list[float] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)
    rotation: np.ndarray | None = None
    codebook: PQCodebook | None = None

    def append(self, iteration: int, value: float, seconds: float) -> None:
        if self.iterations and iteration <= self.iterations[-1]:
            raise ValueError("trace iterations must be strictly increasing")
        self.iterations.append(iteration)
        self.distortions.append(value)
        self.seconds.append(seconds)

    @property
    def final(self) -> float:
        return self.distortions[-1]

    def to_csv(self, timing: bool = True) -> str:
        """``iter,distortion,seconds`` rows; ``timing=False`` writes zero seconds."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "distortion", "seconds"])
        for it, d, s in zip(self.iterations, self.distortions, self.seconds):
            w.writerow([it, repr(d), repr(s if timing else 0.0)])
        return buf.getvalue()


def distortion_gradient(X, R, cb: PQCodebook | None = None, targets=None) -> np.ndarray:
    """Gradient of ``(1/m) ||X R - C||^2`` in ``R`` with ``C`` held fixed.

    ``C`` is ``targets`` when given, otherwise ``phi(X R)`` under ``cb``.
    """
    X = as_matrix(X, "X")
    R = as_matrix(R, "R", square=True)
    XR = X @ R
    if targets is None:
        if cb is None:
            raise ValueError("need either a codebook or fixed targets")
        targets = pq_decode(pq_encode(XR, cb), cb)
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != XR.shape:
        raise ValueError(f"targets have shape {targets.shape}, expected {XR.shape}")
    return (2.0 / len(X)) * (X.T @ (XR - targets))


def _quantized(XR: np.ndarray, cb: PQCodebook) -> np.ndarray:
    return pq_decode(pq_encode(XR, cb), cb)


def opq_iterate(
    X, state: RotationState, cb: PQCodebook, cfg: TrainerConfig
) -> tuple[RotationState, PQCodebook, float]:
    """One outer iteration: codebook refresh, then rotation update.

    Returns the new state, the new codebook and the distortion of ``X R``
    re-encoded under the new codebook and rotation.
    """
    X = as_matrix(X, "X")
    cb = pq_train(X @ state.R, cb.D, cb.K, cfg.seed, max_iters=cfg.kmeans_iters, init=cb)
    mode = cfg.rotation_mode
    if mode == "svd":
        C = _quantized(X @ state.R, cb)
        state = state.advanced(procrustes(X.T @ C))
    elif mode == "gcd":
        C = _quantized(X @ state.R, cb)
        for _ in range(cfg.inner_steps):
            if cfg.reassign_inner:
                C = _quantized(X @ state.R, cb)
            g = distortion_gradient(X, state.R, targets=C)
            state = gcd_step(state, g, cfg.strategy, cfg.lr)
    elif mode == "cayley":
        C = _quantized(X @ state.R, cb)
        # A is a function of R (the Cayley map is an involution), so
        # persisting A across outer iterations equals recovering it here.
        if cfg.reset_cayley:
            cay = CayleyState.zeros(state.n, base=state.R)
        else:
            cay = CayleyState.from_rotation(state.R)
        for _ in range(cfg.inner_steps):
            if cfg.reassign_inner:
                C = _quantized(X @ cay.R, cb)
            cay = cayley_step(cay, distortion_gradient(X, cay.R, targets=C), cfg.lr)
        state = state.advanced(cay.R, steps=cfg.inner_steps)
    XR = X @ state.R
    return state, cb, distortion(XR, _quantized(XR, cb))


def run_trainer(X, cfg: TrainerConfig) -> DistortionTrace:
    """Train from ``R = I`` and a k-means warm start; one trace row per outer iteration."""
    X = as_matrix(X, "X")
    start = time.perf_counter()
    state = RotationState.identity(X.shape[1])
    cb = pq_train(X, cfg.D, cfg.K, cfg.seed, max_iters=cfg.init_iters)
    trace = DistortionTrace()
    trace.append(0, distortion(X, _quantized(X, cb)), time.perf_counter() - start)
    for it in range(1, cfg.outer_iters + 1):
        state, cb, value = opq_iterate(X, state, cb, cfg)
        trace.append(it, value, time.perf_counter() - start)
    trace.rotation = state.R
    trace.codebook = cb
    return trace
