"""Shared numeric primitives: sample sets, distances, factorisation, seeding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from . import _kernels
from .exceptions import (
    DimensionMismatchError,
    InvalidParameterError,
    NotPositiveDefiniteError,
)


@dataclass(frozen=True, eq=False)
class SampleSet:
    """``n`` points in ``d`` dimensions with per-point masses.

    Masses default to uniform. The points array is copied, made read-only and
    validated on construction.
    """

    points: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise InvalidParameterError(f"expected an (n, d) array with n, d >= 1, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise InvalidParameterError("sample coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.weights is None:
            w = np.full(pts.shape[0], 1.0 / pts.shape[0])
        else:
            w = np.array(self.weights, dtype=np.float64)
            if w.shape != (pts.shape[0],) or np.any(w < 0) or not np.isclose(w.sum(), 1.0, atol=1e-9):
                raise InvalidParameterError("weights must be a nonnegative vector of length n summing to 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.n

    def subset(self, idx) -> "SampleSet":
        return SampleSet(self.points[idx])


def as_samples(x: SampleSet | ArrayLike) -> SampleSet:
    return x if isinstance(x, SampleSet) else SampleSet(np.asarray(x, dtype=np.float64))


def _pts(x) -> np.ndarray:
    return x.points if isinstance(x, SampleSet) else as_samples(x).points


def squared_distances(X, Y) -> np.ndarray:
    """Squared Euclidean distances between the rows of ``X`` and ``Y``."""
    x, y = _pts(X), _pts(Y)
    if x.shape[1] != y.shape[1]:
        raise DimensionMismatchError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    return _kernels.sqdist(x, y)


def power_from_squared(sq: np.ndarray, p: float) -> np.ndarray:
    if p == 2:
        return sq.copy()
    if p == 1:
        return np.sqrt(sq)
    return sq ** (0.5 * p)


def pairwise_power_distances(X, Y, p: float) -> np.ndarray:
    """``|X_i - Y_j|^p`` with the Euclidean norm.

    >>> pairwise_power_distances([[0.0], [3.0]], [[4.0]], 1)
    array([[4.],
           [1.]])
    """
    if not p > 0:
        raise InvalidParameterError(f"exponent p must be positive, got {p}")
    return power_from_squared(squared_distances(X, Y), p)


def default_jitter(A: np.ndarray) -> float:
    n = A.shape[0]
    return 1e-8 * float(np.trace(A)) / n if n else 0.0


def cholesky_factor(A: ArrayLike, jitter: float | None = 0.0) -> np.ndarray:
    """Upper-triangular ``R`` with ``R.T @ R == A + jitter * I``.

    ``jitter=None`` selects ``1e-8 * trace(A) / n``.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got shape {A.shape}")
    if not np.allclose(A, A.T, rtol=1e-12, atol=1e-14):
        raise InvalidParameterError("matrix is not symmetric")
    if jitter is None:
        jitter = default_jitter(A)
    if jitter < 0:
        raise InvalidParameterError("jitter must be nonnegative")
    M = A + jitter * np.eye(A.shape[0]) if jitter else A
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"matrix is not positive definite after jitter {jitter:g}") from exc
    return L.T.copy()


def make_rng(seed: int | np.random.SeedSequence | None, *key: int) -> np.random.Generator:
    """Generator for the stream ``key`` under ``seed``.

    Streams are addressed by a spawn key, so stream ``(i,)`` is the same
    whether or not streams ``0..i-1`` were ever created.
    """
    if isinstance(seed, np.random.SeedSequence):
        ss = np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(key))
    else:
        ss = np.random.SeedSequence(0 if seed is None else int(seed), spawn_key=tuple(key))
    return np.random.Generator(np.random.PCG64(ss))
