"""Partial MMD: minimise the weighted MMD over reference weights in a capped simplex.

Three routes to ``min_w w'Kx w + v'Ky v - 2 v'Kyx w`` subject to
``0 <= w_i <= 1/(alpha n)`` and ``sum(w) = 1``:

* :func:`partial_mmd_qp`: accelerated projected gradient with a primal-dual
  interior-point finishing phase, stopped on a certified Frank-Wolfe duality
  gap. Used as the reference answer.
* :func:`partial_mmd_adhoc`: the randomised working-set Newton/gradient
  heuristic, reproduced step for step (including its renormalisation, which can
  leave ``w`` slightly above the cap).
* :func:`partial_mmd_two_stage`: weights read off a partial transport plan;
  feasible, hence an upper bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from . import _kernels
from .exceptions import ConvergenceError, InvalidParameterError, NotPositiveDefiniteError
from .mmd import KernelSpec, MmdParts, weighted_mmd_sq
from .numerics import _pts, cholesky_factor, squared_distances
from .ot import DUMMY_MULTIPLIER, PartialOtResult, partial_wasserstein_sq

NEWTON_STEPS = (1.0, 1 / 5, 1 / 25, 1 / 125, 1 / 625)
GRADIENT_STEPS = tuple(0.1 * s for s in NEWTON_STEPS)


@dataclass
class PartialMmdResult:
    value: float
    weights: np.ndarray
    alpha: float
    method: str
    iterations: int = 0
    history: list = field(default_factory=list)
    max_violation: float = 0.0
    gap: float = 0.0
    newton_fallbacks: int = 0
    transport: PartialOtResult | None = None


def _cap(alpha: float, n: int) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha <= 1.0:
        raise InvalidParameterError(f"alpha must lie in (0, 1], got {alpha}")
    return 1.0 / (alpha * n)


def cap_violation(w: np.ndarray, cap: float) -> float:
    """Largest breach of ``0 <= w_i <= cap`` (0 when feasible)."""
    return float(max(0.0, (w - cap).max(), (-w).max()))


def _linear_minimiser(g: np.ndarray, cap: float) -> np.ndarray:
    """Vertex of the capped simplex minimising ``g . s``: fill the smallest entries first."""
    s = np.zeros_like(g)
    remaining = 1.0
    for i in np.argsort(g, kind="stable"):
        take = min(cap, remaining)
        s[i] = take
        remaining -= take
        if remaining <= 0.0:
            break
    return s


class _Quadratic:
    """``f(w) = w'Kx w - 2 b'w + c`` with ``b = Kyx' v``."""

    def __init__(self, parts: MmdParts):
        m = parts.m
        v = np.full(m, 1.0 / m)
        self.Kx = parts.Kx
        self.b = parts.Kyx.T @ v
        self.c = float(v @ parts.Ky @ v)

    def __call__(self, w):
        return float(w @ self.Kx @ w - 2.0 * (self.b @ w) + self.c)

    def grad(self, w):
        return 2.0 * (self.Kx @ w) - 2.0 * self.b


PG_ITERS = 500
IPM_ITERS = 200


def _fw_gap(q: _Quadratic, w: np.ndarray, cap: float) -> float:
    g = q.grad(w)
    return float(g @ w - g @ _linear_minimiser(g, cap))


def _feasible(w, cap):
    w = np.clip(w, 0.0, cap)
    return w / w.sum()


def _interior_point(q: _Quadratic, cap: float, tol: float, max_iter: int):
    """Mehrotra predictor-corrector on the box-and-simplex QP.

    Works on ``min w'Kw - 2b'w`` with multipliers ``y`` (sum constraint),
    ``z`` (``w >= 0``) and ``s`` (``w <= cap``). The barrier diagonal keeps each
    Newton system positive definite even when ``K`` is singular. Returns the
    best feasible point by Frank-Wolfe gap.
    """
    n = q.b.shape[0]
    H = 2.0 * q.Kx
    c = -2.0 * q.b
    e = np.ones(n)
    w = np.full(n, 1.0 / n)
    z = np.ones(n)
    s = np.ones(n)
    y = float(np.min(H @ w + c)) - 1.0
    best_w, best_gap = w, _fw_gap(q, w, cap)
    it = 0
    while it < max_iter and best_gap > tol:
        it += 1
        t = cap - w
        r_d = H @ w + c - y * e - z + s
        r_p = 1.0 - w.sum()
        mu = (w @ z + t @ s) / (2 * n)
        d = z / w + s / t
        M = H + np.diag(d)
        try:
            L = np.linalg.cholesky(M)
        except np.linalg.LinAlgError:
            break

        def solve(rhs):
            u = solve_triangular(L, np.column_stack([rhs, e]), lower=True, check_finite=False)
            u = solve_triangular(L.T, u, lower=False, check_finite=False)
            dy = (r_p - u[:, 0].sum()) / u[:, 1].sum()
            return u[:, 0] + dy * u[:, 1], dy

        def step(cz, cs):
            dw, dy = solve(-r_d + (cz - w * z) / w - (cs - t * s) / t)
            dz = (cz - w * z - z * dw) / w
            ds = (cs - t * s + s * dw) / t
            return dw, dy, dz, ds

        def max_step(x, dx):
            neg = dx < 0
            return min(1.0, float(np.min(-x[neg] / dx[neg]))) if neg.any() else 1.0

        dw, dy, dz, ds = step(np.zeros(n), np.zeros(n))
        a = min(max_step(w, dw), max_step(t, -dw), max_step(z, dz), max_step(s, ds))
        mu_aff = ((w + a * dw) @ (z + a * dz) + (t - a * dw) @ (s + a * ds)) / (2 * n)
        sigma = (mu_aff / mu) ** 3
        dw, dy, dz, ds = step(sigma * mu - dw * dz, sigma * mu + dw * ds)
        a = 0.995 * min(max_step(w, dw), max_step(t, -dw), max_step(z, dz), max_step(s, ds))
        w = w + a * dw
        y = y + a * dy
        z = z + a * dz
        s = s + a * ds
        cand = _feasible(w, cap)
        gap = _fw_gap(q, cand, cap)
        if gap < best_gap:
            best_w, best_gap = cand, gap
    return best_w, best_gap, it


def partial_mmd_qp(parts: MmdParts, alpha: float, tol: float = 1e-10, max_iter: int = 100_000) -> PartialMmdResult:
    """Constrained minimum to within ``tol`` (certified by the Frank-Wolfe gap).

    Accelerated projected gradient runs first (at most ``min(max_iter, 500)``
    steps). If the gap certificate is not yet below ``tol``, as is typical when
    ``Kx`` is numerically singular and the objective has flat directions, a
    primal-dual interior-point method finishes the job.
    """
    n = parts.n
    cap = _cap(alpha, n)
    q = _Quadratic(parts)
    w = np.full(n, 1.0 / n)
    if cap * n <= 1.0 + 1e-12:
        # alpha == 1: the feasible set is the single point w = 1/n
        return PartialMmdResult(weighted_mmd_sq(parts, w, np.full(parts.m, 1.0 / parts.m)), w, alpha, "qp")

    L = 2.0 * float(np.abs(parts.Kx).sum(axis=1).max())
    step = 1.0 / L
    y = w.copy()
    t = 1.0
    gap = np.inf
    pg_budget = min(max_iter, PG_ITERS)
    it = 0
    while it < pg_budget:
        it += 1
        w_new = _kernels.project_capped_simplex(y - step * q.grad(y), cap)
        # gradient-based adaptive restart keeps the momentum from overshooting
        if np.dot(y - w_new, w_new - w) > 0.0:
            t = 1.0
            y = w_new
        else:
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            y = w_new + ((t - 1.0) / t_new) * (w_new - w)
            t = t_new
        w = w_new
        if it % 10 == 0 or it == pg_budget:
            gap = _fw_gap(q, w, cap)
            if gap <= tol:
                break

    if gap > tol:
        w_ip, gap_ip, ip_steps = _interior_point(q, cap, tol, min(max_iter, IPM_ITERS))
        it += ip_steps
        if gap_ip < gap:
            w, gap = w_ip, gap_ip
    fw = q(w)
    if gap > tol:
        best = PartialMmdResult(fw, w, alpha, "qp", it, gap=gap)
        raise ConvergenceError(f"partial MMD QP did not reach gap {tol:g} (gap {gap:.3g})", best)
    return PartialMmdResult(fw, w, alpha, "qp", it, gap=gap, max_violation=cap_violation(w, cap))


def _working_set(w, gr, cap, r):
    below = w < cap
    above = w > 0
    gr_min = gr[below].min() if below.any() else -np.inf
    gr_max = gr[above].max() if above.any() else np.inf
    with np.errstate(invalid="ignore"):
        lo = gr_min * r
        hi = gr_max * r
    return (above | (gr < lo)) & (below | (gr > hi))


def partial_mmd_adhoc(
    parts: MmdParts,
    alpha: float,
    n_iter: int = 50,
    seed: int | np.random.Generator | None = 0,
) -> PartialMmdResult:
    """Randomised working-set optimiser with Newton and centred-gradient passes.

    Each candidate is clamped to ``[0, 1/(alpha n)]`` and renormalised to sum 1;
    it replaces the incumbent only if the objective strictly drops. The
    renormalisation may push entries over the cap; the worst breach is reported
    in ``max_violation`` rather than repaired.
    """
    n = parts.n
    cap = _cap(alpha, n)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    q = _Quadratic(parts)
    w = np.full(n, 1.0 / n)
    fw = q(w)
    history = [fw]
    if cap * n <= 1.0 + 1e-12:
        return PartialMmdResult(fw, w, alpha, "adhoc", 0, history)

    fallbacks = 0

    def line_search(w, fw, upd, steps):
        for s in steps:
            cand = np.clip(w - s * upd, 0.0, cap)
            total = cand.sum()
            if not total > 0.0:
                continue
            cand /= total
            fc = q(cand)
            if fc < fw:
                w, fw = cand, fc
                history.append(fw)
        return w, fw

    for _ in range(n_iter):
        r = 1.0 - rng.random()
        gr = q.grad(w)
        work = _working_set(w, gr, cap, r)
        if work.any():
            try:
                R = cholesky_factor(q.Kx[np.ix_(work, work)], jitter=None)
            except NotPositiveDefiniteError:
                fallbacks += 1
            else:
                z = solve_triangular(R, gr[work], trans="T", lower=False)
                upd = np.zeros(n)
                upd[work] = solve_triangular(R, z, lower=False)
                w, fw = line_search(w, fw, upd, NEWTON_STEPS)

        gr = q.grad(w)
        work = _working_set(w, gr, cap, r)
        if work.any():
            g = gr[work]
            upd = np.zeros(n)
            upd[work] = g - g.mean()
            w, fw = line_search(w, fw, upd, GRADIENT_STEPS)

    return PartialMmdResult(fw, w, alpha, "adhoc", n_iter, history, cap_violation(w, cap), newton_fallbacks=fallbacks)


def _two_stage_from_sq(sq_xy, sq_xx_sub, sq_yy, alpha, p, kernel, dummy_multiplier=DUMMY_MULTIPLIER):
    """Two-stage value from squared distances.

    ``sq_xx_sub(idx)`` returns the squared-distance block among reference
    points ``idx``; only the support of ``w`` is ever needed.
    """
    ot_res = partial_wasserstein_sq(sq_xy, alpha, p, dummy_multiplier)
    w = ot_res.reference_weights
    supp = np.flatnonzero(w > 0.0)
    ws = w[supp]
    m = sq_yy.shape[0]
    v = np.full(m, 1.0 / m)
    Kxx = kernel.from_sq(sq_xx_sub(supp))
    Kyy = kernel.from_sq(sq_yy)
    Kyx = kernel.from_sq(sq_xy[supp].T)
    value = float(ws @ Kxx @ ws + v @ Kyy @ v - 2.0 * (v @ Kyx @ ws))
    return value, w, ot_res


def partial_mmd_two_stage(
    X, Y, alpha: float, p: float, k: KernelSpec, dummy_multiplier: float = DUMMY_MULTIPLIER
) -> PartialMmdResult:
    """Upper bound from the partial transport plan: ``w_i = (1/alpha) sum_j P_ij``."""
    x, y = _pts(X), _pts(Y)
    cap = _cap(alpha, x.shape[0])
    sq_xy = squared_distances(x, y)
    value, w, ot_res = _two_stage_from_sq(
        sq_xy, lambda idx: squared_distances(x[idx], x[idx]), squared_distances(y, y), alpha, p, k, dummy_multiplier
    )
    return PartialMmdResult(
        value, w, float(alpha), "two-stage", 1, max_violation=cap_violation(w, cap), transport=ot_res
    )
