"""Dataset readers/writers (fvecs, ivecs) and the synthetic fixture.

Each fvecs/ivecs record is a little-endian int32 dimension ``d`` followed by
``d`` little-endian float32 (fvecs) or int32 (ivecs) values. All records in
a file share ``d``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .linalg import random_rotation

#: Standard deviation of the leading synthetic axis (SIFT-like magnitude).
SYNTHETIC_SCALE = 135.0


class VecsFormatError(ValueError):
    """Malformed vecs file. ``code`` distinguishes the failure kind."""

    code = "malformed"


class TruncatedRecordError(VecsFormatError):
    code = "truncated"


class InconsistentDimensionError(VecsFormatError):
    code = "inconsistent-dimension"


class InvalidDimensionError(VecsFormatError):
    code = "invalid-dimension"


def _parse_vecs(raw: bytes, value_dtype: str, path) -> np.ndarray:
    if not raw:
        return np.zeros((0, 0), dtype=value_dtype)
    if len(raw) % 4:
        raise TruncatedRecordError(f"{path}: size {len(raw)} is not a multiple of 4 bytes")
    words = np.frombuffer(raw, dtype="<i4")
    d = int(words[0])
    if d <= 0:
        raise InvalidDimensionError(f"{path}: record 0 declares dimension {d}")
    width = d + 1
    if words.size % width:
        # Either a short last record or a different d somewhere; walk to find out.
        pos = 0
        rec = 0
        while pos < words.size:
            di = int(words[pos])
            if di != d:
                if di <= 0:
                    raise InvalidDimensionError(f"{path}: record {rec} declares dimension {di}")
                raise InconsistentDimensionError(
                    f"{path}: record {rec} has dimension {di}, expected {d}"
                )
            if pos + width > words.size:
                raise TruncatedRecordError(f"{path}: record {rec} is truncated")
            pos += width
            rec += 1
    table = words.reshape(-1, width)
    bad = np.flatnonzero(table[:, 0] != d)
    if bad.size:
        di = int(table[bad[0], 0])
        if di <= 0:
            raise InvalidDimensionError(f"{path}: record {bad[0]} declares dimension {di}")
        raise InconsistentDimensionError(
            f"{path}: record {bad[0]} has dimension {di}, expected {d}"
        )
    return table[:, 1:].copy().view(value_dtype)


def read_fvecs(path) -> np.ndarray:
    """Read an fvecs file into an ``(m, d)`` float32 array.

    An empty file yields a ``(0, 0)`` array; the dimension is then unknown.
    """
    with open(path, "rb") as f:
        return _parse_vecs(f.read(), "<f4", path)


def read_ivecs(path) -> np.ndarray:
    """Read an ivecs file into an ``(m, d)`` int32 array."""
    with open(path, "rb") as f:
        return _parse_vecs(f.read(), "<i4", path)


def _write_vecs(path, arr: np.ndarray, dtype: str) -> None:
    arr = np.asarray(arr)
    if arr.ndim != 2:
        raise ValueError("expected a 2-D array")
    m, d = arr.shape
    out = np.empty((m, d + 1), dtype="<i4")
    out[:, 0] = d
    out[:, 1:] = np.ascontiguousarray(arr, dtype=dtype).view("<i4")
    with open(path, "wb") as f:
        f.write(out.tobytes())


def write_fvecs(path, X) -> None:
    """Write rows of ``X`` as float32 fvecs records."""
    _write_vecs(path, X, "<f4")


def write_ivecs(path, ids) -> None:
    _write_vecs(path, ids, "<i4")


def gen_synthetic(
    m: int, n: int, anisotropy: float = 0.8, seed: int = 0, scale: float = SYNTHETIC_SCALE
) -> np.ndarray:
    """Correlated Gaussian embeddings.

    Covariance eigenvalues are ``scale**2 * anisotropy**k`` for
    ``k = 0..n-1``, expressed in a random (seeded) basis so that the PQ
    subspaces are correlated.
    """
    if not 0 < anisotropy <= 1:
        raise ValueError(f"anisotropy must be in (0, 1], got {anisotropy}")
    if m < 1 or n < 1:
        raise ValueError("m and n must be positive")
    rng = np.random.default_rng(seed)
    basis = random_rotation(n, rng)
    std = scale * np.sqrt(anisotropy ** np.arange(n))
    z = rng.standard_normal((m, n))
    return (z * std) @ basis.T


@dataclass
class Dataset:
    name: str
    X: np.ndarray
    queries: np.ndarray | None = None
    ground_truth: np.ndarray | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.queries is not None:
            self.queries = np.asarray(self.queries, dtype=np.float64)
            if self.queries.shape[1] != self.X.shape[1]:
                raise ValueError("queries and base vectors differ in dimension")
        if self.ground_truth is not None:
            gt = np.asarray(self.ground_truth)
            if self.queries is None or len(gt) != len(self.queries):
                raise ValueError("ground truth needs one row per query")
            if gt.size and (gt.min() < 0 or gt.max() >= len(self.X)):
                raise ValueError("ground-truth ids out of range")
            self.ground_truth = gt


def load_dataset(path: str | os.PathLike, name: str | None = None) -> Dataset:
    """Load base vectors from an fvecs file."""
    X = read_fvecs(path)
    if X.size == 0:
        raise VecsFormatError(f"{path}: no vectors")
    return Dataset(name or os.path.basename(os.fspath(path)), X)
