"""Per-point attribution: transport-plan decomposition and the MMD witness function."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatchError, InvalidParameterError
from .mmd import KernelSpec, kernel_matrix
from .numerics import _pts, power_from_squared
from .ot import Coupling, PartialOtResult

SUPPORT_TOL = 1e-12
CSV_HEADER = ("ref_index", "test_index", "mass", "cost")


@dataclass(frozen=True)
class TestAttribution:
    __test__ = False  # not a pytest class

    test_index: int
    ref_indices: np.ndarray
    masses: np.ndarray
    contribution: float

    def to_dict(self):
        return {
            "test_index": self.test_index,
            "ref_indices": [int(i) for i in self.ref_indices],
            "masses": [float(x) for x in self.masses],
            "contribution": self.contribution,
        }


def full_coupling_result(coupling: Coupling, sq: np.ndarray, p: float) -> PartialOtResult:
    """View a full (alpha = 1) coupling as a partial result with an empty dummy column."""
    cost = power_from_squared(sq, p)
    return PartialOtResult(
        max(coupling.objective, 0.0) ** (1.0 / p),
        coupling.matrix,
        np.zeros(coupling.matrix.shape[0]),
        cost,
        1.0,
        float(p),
        float("nan"),
    )


def coupling_attribution(result: PartialOtResult) -> list[TestAttribution]:
    """For every test point: matched reference points, their masses, and its share of ``distance ** p``."""
    P = result.plan
    out = []
    contrib = (result.cost * P).sum(axis=0) / result.alpha
    for j in range(P.shape[1]):
        col = P[:, j]
        idx = np.flatnonzero(col > SUPPORT_TOL)
        out.append(TestAttribution(j, idx, col[idx], float(contrib[j])))
    return out


def witness_values(X, Y, w, v, k: KernelSpec, query) -> np.ndarray:
    """``sum_i w_i k(x_i, t) - sum_j v_j k(y_j, t)`` at every query point ``t``."""
    x, y, t = _pts(X), _pts(Y), _pts(query)
    w = np.asarray(w, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if w.shape != (x.shape[0],) or v.shape != (y.shape[0],):
        raise DimensionMismatchError("weight vectors must match the sample sizes")
    if not (np.isclose(w.sum(), 1.0, atol=1e-8) and np.isclose(v.sum(), 1.0, atol=1e-8)):
        raise InvalidParameterError("witness weights must each sum to 1")
    supp = np.flatnonzero(w != 0)
    return w[supp] @ kernel_matrix(x[supp], t, k) - v @ kernel_matrix(y, t, k)


@dataclass(frozen=True)
class MatchingExport:
    """Rows ``(ref_index, test_index, mass, cost)``; dummy rows carry ``test_index = -1``."""

    ref_index: np.ndarray
    test_index: np.ndarray
    mass: np.ndarray
    cost: np.ndarray

    def __len__(self):
        return self.ref_index.size

    def rows(self):
        for i, j, m, c in zip(self.ref_index, self.test_index, self.mass, self.cost):
            yield int(i), int(j), float(m), float(c)

    def to_csv(self, fh=None) -> str | None:
        buf = io.StringIO() if fh is None else fh
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for i, j, m, c in self.rows():
            w.writerow((i, j, f"{m:.17g}", f"{c:.17g}"))
        return buf.getvalue() if fh is None else None


def export_matching(result: PartialOtResult, X=None, Y=None) -> MatchingExport:
    """Nonzero plan entries plus per-reference dummy mass, ready for plotting elsewhere."""
    P = result.plan
    if X is not None and _pts(X).shape[0] != P.shape[0]:
        raise DimensionMismatchError("reference size does not match the plan")
    if Y is not None and _pts(Y).shape[0] != P.shape[1]:
        raise DimensionMismatchError("test size does not match the plan")
    ii, jj = np.nonzero(P > SUPPORT_TOL)
    di = np.flatnonzero(result.dummy_column > SUPPORT_TOL)
    dummy_cost = result.D**result.p if np.isfinite(result.D) else np.nan
    ref = np.concatenate([ii, di])
    test = np.concatenate([jj, np.full(di.size, -1)])
    mass = np.concatenate([P[ii, jj], result.dummy_column[di]])
    cost = np.concatenate([result.cost[ii, jj], np.full(di.size, dummy_cost)])
    order = np.lexsort((test, ref))
    return MatchingExport(ref[order], test[order], mass[order], cost[order])
