"""Exact discrete optimal transport and the dummy-point partial Wasserstein distance."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels
from .exceptions import InfeasibleProblemError, InvalidParameterError, SolverError
from .numerics import power_from_squared, squared_distances

MARGINAL_TOL = 1e-8
FEASIBILITY_TOL = 1e-6
DUMMY_MULTIPLIER = 1.1


def as_measure(weights) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64).ravel()
    if w.size == 0 or not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InvalidParameterError("a discrete measure needs finite nonnegative weights")
    return w


def uniform(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


@dataclass(frozen=True)
class Coupling:
    matrix: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray
    objective: float
    iterations: int = 0

    def marginal_error(self) -> float:
        return float(
            max(
                np.abs(self.matrix.sum(axis=1) - self.row_marginal).max(),
                np.abs(self.matrix.sum(axis=0) - self.col_marginal).max(),
            )
        )


def solve_discrete_ot(cost, mu, nu, *, pivot: str = "block") -> Coupling:
    """Minimise ``sum(cost * P)`` over couplings ``P`` of ``mu`` and ``nu``.

    Network simplex, exact up to floating point. ``pivot="bland"`` switches
    the entering-arc rule to the first eligible arc in index order (slow,
    useful as a cross-check).
    """
    C = np.asarray(cost, dtype=np.float64)
    mu = as_measure(mu)
    nu = as_measure(nu)
    if C.ndim != 2 or C.shape != (mu.size, nu.size):
        raise InvalidParameterError(f"cost shape {C.shape} does not match marginals ({mu.size}, {nu.size})")
    if not np.all(np.isfinite(C)) or np.any(C < 0):
        raise InvalidParameterError("cost entries must be finite and nonnegative")
    smu, snu = mu.sum(), nu.sum()
    if abs(smu - snu) > FEASIBILITY_TOL:
        raise InfeasibleProblemError(f"marginal masses differ: {smu:.12g} vs {snu:.12g}")
    if pivot not in ("block", "bland"):
        raise InvalidParameterError(f"unknown pivot rule {pivot!r}")
    a = mu / smu
    b = nu / snu
    plan, _, iters, status, residual = _kernels.transport_simplex(C, a, b, bland=pivot == "bland")
    if status != _kernels.STATUS_OPTIMAL:
        raise SolverError(f"network simplex stopped with status {status} after {iters} pivots")
    if residual > MARGINAL_TOL:
        raise SolverError(f"artificial arcs still carry mass {residual:.3g}")
    coupling = Coupling(plan, a, b, float(np.sum(C * plan)), int(iters))
    err = coupling.marginal_error()
    if err > MARGINAL_TOL:
        raise SolverError(f"marginal violation {err:.3g} exceeds {MARGINAL_TOL}")
    return coupling


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha <= 1.0:
        raise InvalidParameterError(f"alpha must lie in (0, 1], got {alpha}")
    return alpha


class PartialProblem(NamedTuple):
    cost: np.ndarray
    mu: np.ndarray
    nu: np.ndarray
    D: float


def _partial_problem_from_sq(sq, alpha, p, dummy_multiplier) -> PartialProblem:
    n, m = sq.shape
    max_dist = float(np.sqrt(sq.max()))
    D = dummy_multiplier * max_dist if max_dist > 0 else 1.0
    cost = np.empty((n, m + 1))
    cost[:, :m] = power_from_squared(sq, p)
    cost[:, m] = D**p
    nu = np.empty(m + 1)
    nu[:m] = alpha / m
    nu[m] = 1.0 - alpha
    return PartialProblem(cost, uniform(n), nu, D)


def build_partial_problem(X, Y, alpha: float, p: float, dummy_multiplier: float = DUMMY_MULTIPLIER) -> PartialProblem:
    """Augmented transport problem: the test side gains a far-away point of mass ``1 - alpha``.

    The dummy sits at ``D = dummy_multiplier * max|X_i - Y_j|``; when every
    distance is zero ``D`` falls back to 1.
    """
    alpha = _check_alpha(alpha)
    if not p > 0:
        raise InvalidParameterError(f"exponent p must be positive, got {p}")
    if not dummy_multiplier > 1.0:
        raise InvalidParameterError("dummy_multiplier must exceed 1 so the dummy is farther than every test point")
    return _partial_problem_from_sq(squared_distances(X, Y), alpha, p, dummy_multiplier)


@dataclass(frozen=True)
class PartialOtResult:
    distance: float
    plan: np.ndarray  # N x M real block
    dummy_column: np.ndarray
    cost: np.ndarray  # N x M, |X_i - Y_j|^p
    alpha: float
    p: float
    D: float

    @property
    def transported_cost(self) -> float:
        """Unnormalised ``sum_ij C_ij P_ij`` over the real block."""
        return float(np.sum(self.cost * self.plan))

    @property
    def reference_weights(self) -> np.ndarray:
        """Row sums of the real block divided by alpha."""
        return self.plan.sum(axis=1) / self.alpha


def _partial_from_problem(prob: PartialProblem, alpha, p) -> PartialOtResult:
    coupling = solve_discrete_ot(prob.cost, prob.mu, prob.nu)
    m = prob.cost.shape[1] - 1
    plan = coupling.matrix[:, :m]
    cost = prob.cost[:, :m]
    total = float(np.sum(cost * plan)) / alpha
    distance = max(total, 0.0) ** (1.0 / p)
    return PartialOtResult(distance, plan, coupling.matrix[:, m].copy(), cost, alpha, float(p), prob.D)


def partial_wasserstein(X, Y, alpha: float, p: float = 2.0, dummy_multiplier: float = DUMMY_MULTIPLIER) -> PartialOtResult:
    """Partial Wasserstein distance matching test mass ``alpha`` of the reference.

    ``distance ** p = (1/alpha) * sum_{i, j<=M} C_ij P_ij`` with the dummy
    column left out of the sum.
    """
    prob = build_partial_problem(X, Y, alpha, p, dummy_multiplier)
    return _partial_from_problem(prob, alpha, p)


def partial_wasserstein_sq(sq: np.ndarray, alpha: float, p: float, dummy_multiplier: float = DUMMY_MULTIPLIER) -> PartialOtResult:
    """As :func:`partial_wasserstein`, from precomputed squared distances."""
    alpha = _check_alpha(alpha)
    return _partial_from_problem(_partial_problem_from_sq(sq, alpha, p, dummy_multiplier), alpha, p)


def wasserstein_sq(sq: np.ndarray, p: float) -> tuple[float, Coupling]:
    n, m = sq.shape
    coupling = solve_discrete_ot(power_from_squared(sq, p), uniform(n), uniform(m))
    return max(coupling.objective, 0.0) ** (1.0 / p), coupling


def wasserstein(X, Y, p: float = 2.0) -> tuple[float, Coupling]:
    """Full ``W_p`` between the uniform empirical measures; returns distance and coupling."""
    if not p > 0:
        raise InvalidParameterError(f"exponent p must be positive, got {p}")
    return wasserstein_sq(squared_distances(X, Y), p)
