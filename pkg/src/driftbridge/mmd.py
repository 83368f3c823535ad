"""Kernels and the weighted biased MMD estimator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .exceptions import DimensionMismatchError, InvalidParameterError
from .numerics import _pts, squared_distances

FAMILIES = ("squared-exponential", "exponential")


@dataclass(frozen=True)
class KernelSpec:
    family: str = "squared-exponential"
    lengthscale: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidParameterError(f"unknown kernel family {self.family!r}; choose from {FAMILIES}")
        if not self.lengthscale > 0:
            raise InvalidParameterError(f"lengthscale must be positive, got {self.lengthscale}")

    def from_sq(self, sq: np.ndarray) -> np.ndarray:
        """Kernel values from squared distances."""
        if self.family == "squared-exponential":
            return np.exp(sq * (-0.5 / self.lengthscale**2))
        return np.exp(np.sqrt(sq) * (-1.0 / self.lengthscale))


@dataclass(frozen=True)
class MmdParts:
    """Kernel blocks ``Kx`` (n x n), ``Ky`` (m x m) and ``Kyx`` (m x n)."""

    Kx: np.ndarray
    Ky: np.ndarray
    Kyx: np.ndarray

    @property
    def n(self) -> int:
        return self.Kx.shape[0]

    @property
    def m(self) -> int:
        return self.Ky.shape[0]

    @classmethod
    def from_samples(cls, X, Y, kernel: KernelSpec) -> "MmdParts":
        return cls(kernel_matrix(X, X, kernel), kernel_matrix(Y, Y, kernel), kernel_matrix(Y, X, kernel))


def median_lengthscale(X) -> float:
    """Median pairwise Euclidean distance within ``X`` (1 if that median is 0)."""
    x = _pts(X)
    if x.shape[0] < 2:
        raise InvalidParameterError("median heuristic needs at least two points")
    med = float(np.median(pdist(x)))
    return med if med > 0 else 1.0


def kernel_matrix(A, B, k: KernelSpec) -> np.ndarray:
    return k.from_sq(squared_distances(A, B))


def weighted_mmd_sq(parts: MmdParts, w, v) -> float:
    """``w' Kx w + v' Ky v - 2 v' Kyx w``, unclamped."""
    w = np.asarray(w, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if w.shape != (parts.n,) or v.shape != (parts.m,):
        raise DimensionMismatchError(
            f"weight lengths ({w.size}, {v.size}) do not match kernel blocks ({parts.n}, {parts.m})"
        )
    return float(w @ parts.Kx @ w + v @ parts.Ky @ v - 2.0 * (v @ parts.Kyx @ w))


def mmd_sq(X, Y, k: KernelSpec) -> float:
    """Biased (V-statistic) squared MMD with uniform weights."""
    parts = MmdParts.from_samples(X, Y, k)
    return weighted_mmd_sq(parts, np.full(parts.n, 1.0 / parts.n), np.full(parts.m, 1.0 / parts.m))
