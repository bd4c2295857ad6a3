"""Command-line entry point: ``givenspq {train,eval,bench,gen}``.

Exit codes: 0 on success, 2 for usage or configuration errors, 3 for
unreadable or malformed input data.
"""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

import numpy as np

from .bench import BENCH_DIMS, BENCH_METHODS, records_to_csv, run_bench, slopes
from .data import SYNTHETIC_SCALE, VecsFormatError, gen_synthetic, read_fvecs, read_ivecs, write_fvecs
from .descent import SelectionStrategy
from .opq import TrainerConfig, run_trainer
from .pq import adc_eval, distortion, quantize

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3

ROTATIONS = ("frozen", "svd", "gcd-r", "gcd-g", "gcd-s", "gcd-g-overlap", "gcd-r-overlap", "cayley")

_GCD_KINDS = {
    "gcd-r": "random",
    "gcd-g": "greedy",
    "gcd-s": "steepest",
    "gcd-g-overlap": "overlapping-greedy",
    "gcd-r-overlap": "overlapping-random",
}


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


def trainer_config(rotation: str, **kwargs) -> TrainerConfig:
    """Translate a CLI rotation name into a :class:`TrainerConfig`."""
    seed = kwargs.get("seed", 0)
    if rotation in _GCD_KINDS:
        kind = _GCD_KINDS[rotation]
        strategy = SelectionStrategy(kind, seed if kind.endswith("random") else None)
        return TrainerConfig(rotation_mode="gcd", strategy=strategy, **kwargs)
    if rotation not in ROTATIONS:
        raise ConfigError(f"unknown rotation {rotation!r}")
    return TrainerConfig(rotation_mode=rotation, **kwargs)


def _read_vectors(path: str) -> np.ndarray:
    try:
        X = read_fvecs(path)
    except (OSError, VecsFormatError) as exc:
        raise DataError(str(exc)) from exc
    if X.size == 0:
        raise DataError(f"{path}: no vectors")
    return X.astype(np.float64)


def _synthetic(args, rows: int) -> np.ndarray:
    return gen_synthetic(rows, args.dim, args.anisotropy, seed=args.data_seed, scale=args.scale)


def _add_synthetic_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("synthetic data")
    g.add_argument("--m", type=int, default=10_000, help="number of synthetic vectors")
    g.add_argument("--dim", type=int, default=32, help="synthetic dimension")
    g.add_argument("--anisotropy", type=float, default=0.8)
    g.add_argument("--scale", type=float, default=SYNTHETIC_SCALE, help="standard deviation of the leading axis")
    g.add_argument("--data-seed", type=int, default=0)


def _add_trainer_flags(p: argparse.ArgumentParser, centroids_flag: str) -> None:
    p.add_argument("--rotation", choices=ROTATIONS, default="gcd-g")
    p.add_argument("--d", type=int, default=4, help="number of PQ subspaces")
    p.add_argument(centroids_flag, dest="K", type=int, default=16, help="centroids per subspace")
    p.add_argument("--outer", type=int, default=100, help="outer iterations")
    p.add_argument("--inner", type=int, default=5, help="rotation steps per outer iteration")
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--kmeans-iters", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)


def _config_from(args) -> TrainerConfig:
    return trainer_config(
        args.rotation,
        outer_iters=args.outer,
        inner_steps=args.inner,
        lr=args.lr,
        seed=args.seed,
        D=args.d,
        K=args.K,
        kmeans_iters=args.kmeans_iters,
    )


def _write(out: str | None, text: str) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    try:
        with open(out, "w", newline="") as f:
            f.write(text)
    except OSError as exc:
        raise DataError(str(exc)) from exc


def cmd_train(args) -> int:
    cfg = _config_from(args)
    X = _synthetic(args, args.m) if args.data == "synthetic" else _read_vectors(args.data)
    if args.limit:
        X = X[: args.limit]
    trace = run_trainer(X, cfg)
    _write(args.out, trace.to_csv(timing=not args.no_timing))
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _config_from(args)
    gt = None
    if args.base == "synthetic":
        X = _synthetic(args, args.m + args.queries_count)
        base, queries = X[: args.m], X[args.m :]
    else:
        if args.queries is None:
            raise ConfigError("--queries is required with an fvecs base")
        base, queries = _read_vectors(args.base), _read_vectors(args.queries)
        if args.gt is not None:
            try:
                gt = read_ivecs(args.gt)
            except (OSError, VecsFormatError) as exc:
                raise DataError(str(exc)) from exc
            if len(gt) != len(queries):
                raise DataError("ground truth needs one row per query")
        elif len(base) > 100_000:
            raise ConfigError("exact neighbours are only computed for up to 1e5 base vectors; pass --gt")
    if queries.shape[1] != base.shape[1]:
        raise DataError("queries and base vectors differ in dimension")
    if not 1 <= args.k <= len(base):
        raise ConfigError(f"--k must be in [1, {len(base)}]")
    trace = run_trainer(base, cfg)
    R, cb = trace.rotation, trace.codebook
    recall = adc_eval(queries, base, R, cb, args.k, ground_truth=gt)
    XR = base @ R
    lines = [
        f"rotation={args.rotation}",
        f"k={args.k}",
        f"recall@{args.k}={recall!r}",
        f"distortion={distortion(XR, quantize(XR, cb))!r}",
    ]
    _write(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_bench(args) -> int:
    records = run_bench(args.dims, args.methods, args.trials, args.seed)
    _write(args.out, records_to_csv(records))
    if args.out not in (None, "-"):
        for method, slope in slopes(records).items():
            print(f"{method} slope={slope:.3f}")
    return EXIT_OK


def cmd_gen(args) -> int:
    X = _synthetic(args, args.m)
    try:
        write_fvecs(args.out, X.astype(np.float32))
    except OSError as exc:
        raise DataError(str(exc)) from exc
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="givenspq", description="Rotation learning for product quantization.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a rotation and codebook, write a distortion trace CSV")
    p.add_argument("--data", required=True, help="fvecs path or 'synthetic'")
    p.add_argument("--limit", type=int, default=0, help="use only the first N vectors")
    _add_trainer_flags(p, "--k")
    p.add_argument("--out", default=None, help="CSV path (stdout when omitted)")
    p.add_argument("--no-timing", action="store_true", help="write 0 in the seconds column")
    _add_synthetic_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="train, then report ADC recall@k and distortion")
    p.add_argument("--base", required=True, help="fvecs path or 'synthetic'")
    p.add_argument("--queries", default=None)
    p.add_argument("--gt", default=None, help="ivecs ground truth; exact search when omitted")
    p.add_argument("--k", type=int, default=100, help="recall depth")
    p.add_argument("--queries-count", type=int, default=100, help="synthetic query count")
    _add_trainer_flags(p, "--centroids")
    p.add_argument("--out", default=None)
    _add_synthetic_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="time one rotation update per method and dimension")
    p.add_argument("--dims", type=int, nargs="+", default=list(BENCH_DIMS))
    p.add_argument("--methods", nargs="+", choices=BENCH_METHODS, default=list(BENCH_METHODS))
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen", help="write the synthetic fixture as fvecs")
    p.add_argument("--out", required=True)
    _add_synthetic_flags(p)
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DataError, VecsFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
