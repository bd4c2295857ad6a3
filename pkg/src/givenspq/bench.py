"""Per-step runtime of GCD-R versus the Cayley baseline.

A GCD-R step touches ``n/2`` column pairs and costs ``O(n^2)``; a Cayley
step needs an ``n x n`` inverse and a few matrix products, ``O(n^3)``. The
benchmark times a single rotation update given a precomputed gradient,
single-threaded so that the fitted log-log slopes reflect arithmetic cost
rather than BLAS parallelism.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from .cayley import CayleyState, cayley_step
from .descent import SelectionStrategy, gcd_step
from .linalg import RotationState

BENCH_DIMS = (64, 128, 256, 512, 1024)
BENCH_METHODS = ("gcd-r", "cayley")
WARMUP_STEPS = 3


@dataclass(frozen=True)
class BenchRecord:
    method: str
    n: int
    seconds_per_step: float
    std: float
    trials: int
    seed: int

    def __post_init__(self):
        if not self.seconds_per_step > 0:
            raise ValueError("timings must be positive")


def time_steps(step: Callable[[], None], trials: int, warmup: int = WARMUP_STEPS) -> tuple[float, float]:
    """Median and standard deviation of ``step()`` wall time over ``trials`` calls.

    The median keeps isolated scheduler stalls from dominating a point.
    """
    for _ in range(warmup):
        step()
    times = np.empty(trials)
    for t in range(trials):
        start = time.perf_counter()
        step()
        times[t] = time.perf_counter() - start
    return float(np.median(times)), float(times.std())


def _gcd_r_stepper(n: int, g: np.ndarray, seed: int, lr: float) -> Callable[[], None]:
    strategy = SelectionStrategy("random", seed)
    holder = [RotationState.identity(n)]

    def step():
        holder[0] = gcd_step(holder[0], g, strategy, lr, check=False)

    return step


def _cayley_stepper(n: int, g: np.ndarray, lr: float) -> Callable[[], None]:
    holder = [CayleyState.zeros(n)]

    def step():
        holder[0] = cayley_step(holder[0], g, lr)

    return step


def bench_method(method: str, n: int, trials: int = 20, seed: int = 0, lr: float = 1e-3) -> BenchRecord:
    if method not in BENCH_METHODS:
        raise ValueError(f"unknown bench method {method!r}; expected one of {BENCH_METHODS}")
    if trials < 1:
        raise ValueError("need at least one trial")
    g = np.random.default_rng([seed, n]).standard_normal((n, n))
    if method == "gcd-r":
        step = _gcd_r_stepper(n, g, seed, lr)
    else:
        step = _cayley_stepper(n, g, lr)
    mean, std = time_steps(step, trials)
    return BenchRecord(method, n, mean, std, trials, seed)


def run_bench(
    dims: Sequence[int] = BENCH_DIMS,
    methods: Sequence[str] = BENCH_METHODS,
    trials: int = 20,
    seed: int = 0,
    threads: int = 1,
) -> list[BenchRecord]:
    """Time every method at every dimension with BLAS limited to ``threads``."""
    with threadpool_limits(threads):
        return [bench_method(m, n, trials, seed) for m in methods for n in dims]


def loglog_slope(ns, seconds) -> float:
    """Least-squares slope of ``log(seconds)`` against ``log(n)``."""
    ns = np.asarray(ns, dtype=np.float64)
    seconds = np.asarray(seconds, dtype=np.float64)
    if ns.size < 2 or ns.shape != seconds.shape:
        raise ValueError("need matching arrays with at least two points")
    return float(np.polyfit(np.log(ns), np.log(seconds), 1)[0])


def slopes(records: Sequence[BenchRecord]) -> dict[str, float]:
    out = {}
    for method in dict.fromkeys(r.method for r in records):
        rows = sorted((r for r in records if r.method == method), key=lambda r: r.n)
        out[method] = loglog_slope([r.n for r in rows], [r.seconds_per_step for r in rows])
    return out


def records_to_csv(records: Sequence[BenchRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "n", "seconds_per_step", "trials"])
    for r in records:
        w.writerow([r.method, r.n, repr(r.seconds_per_step), r.trials])
    return buf.getvalue()
