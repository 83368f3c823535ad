"""Hot numeric kernels.

Each kernel has a loop form compiled by numba and a numpy form used when the
numba backend is disabled (see ``_accel``). Public wrappers at the bottom pick
the active one; both forms stay importable so tests and the benchmark can run
them side by side.

The transport solver is a primal network simplex on the bipartite graph
``sources -> sinks`` plus an artificial root, in the spirit of LEMON's
implementation: big-M artificial arcs, block-search pricing, and the
"last blocking arc" leaving rule that keeps the basis strongly feasible so
degenerate pivots cannot cycle.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.spatial.distance import cdist

from ._accel import USE_NUMBA, jit

# Reduced-cost tolerance on costs normalised to max 1.
PRICE_EPS = 1e-10

STATUS_OPTIMAL = 0
STATUS_MAX_ITER = 1
STATUS_UNBOUNDED = 2


# ---------------------------------------------------------------------------
# pairwise squared euclidean distances


def _sqdist_loop(x, y):
    n, d = x.shape
    m = y.shape[0]
    out = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            s = 0.0
            for k in range(d):
                t = x[i, k] - y[j, k]
                s += t * t
            out[i, j] = s
    return out


def sqdist_numpy(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return cdist(x, y, metric="sqeuclidean")


sqdist_numba = jit(_sqdist_loop)


# ---------------------------------------------------------------------------
# euclidean projection onto {w : sum(w) = 1, 0 <= w_i <= cap}


def _project_loop(y, cap):
    n = y.shape[0]
    lo = y[0]
    hi = y[0]
    for i in range(n):
        if y[i] < lo:
            lo = y[i]
        if y[i] > hi:
            hi = y[i]
    lo -= cap
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        s = 0.0
        for i in range(n):
            t = y[i] - mid
            if t > cap:
                t = cap
            elif t < 0.0:
                t = 0.0
            s += t
        if s > 1.0:
            lo = mid
        else:
            hi = mid
    tau = 0.5 * (lo + hi)
    # exact shift on the linear piece containing tau
    n_free = 0
    n_cap = 0
    s_free = 0.0
    for i in range(n):
        t = y[i] - tau
        if t >= cap:
            n_cap += 1
        elif t > 0.0:
            n_free += 1
            s_free += y[i]
    if n_free > 0:
        tau_exact = (s_free + cap * n_cap - 1.0) / n_free
        if abs(tau_exact - tau) <= 1e-9 * (1.0 + abs(tau)):
            tau = tau_exact
    out = np.empty(n)
    for i in range(n):
        t = y[i] - tau
        if t > cap:
            t = cap
        elif t < 0.0:
            t = 0.0
        out[i] = t
    return out


def project_numpy(y: np.ndarray, cap: float) -> np.ndarray:
    lo = float(y.min()) - cap
    hi = float(y.max())
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if np.clip(y - mid, 0.0, cap).sum() > 1.0:
            lo = mid
        else:
            hi = mid
    tau = 0.5 * (lo + hi)
    t = y - tau
    capped = t >= cap
    free = (t > 0.0) & ~capped
    n_free = int(free.sum())
    if n_free:
        tau_exact = (y[free].sum() + cap * capped.sum() - 1.0) / n_free
        if abs(tau_exact - tau) <= 1e-9 * (1.0 + abs(tau)):
            tau = tau_exact
    return np.clip(y - tau, 0.0, cap)


project_numba = jit(_project_loop)


# ---------------------------------------------------------------------------
# network simplex


def _price_loop(cost, pi, state, n, m, start, block, eps):
    """Block search: most negative reduced cost in the first block holding one."""
    n_real = n * m
    best = -1
    best_rc = -eps
    e = start
    i = e // m
    j = e - i * m
    cnt = 0
    for _ in range(n_real):
        if state[e] == 0:
            rc = cost[e] + pi[i] - pi[n + j]
            if rc < best_rc:
                best_rc = rc
                best = e
        cnt += 1
        e += 1
        j += 1
        if j == m:
            j = 0
            i += 1
        if e == n_real:
            e = 0
            i = 0
            j = 0
        if cnt >= block:
            if best >= 0:
                return best, e
            cnt = 0
    return best, e


def _price_numpy(cost, pi, state, n, m, start, block, eps):
    n_real = n * m
    rc = cost[:n_real] + np.repeat(pi[:n], m) - np.tile(pi[n : n + m], n)
    order = np.roll(np.arange(n_real), -start)
    cand = (rc[order] < -eps) & (state[order] == 0)
    hits = np.flatnonzero(cand)
    if hits.size == 0:
        return -1, start
    blk = hits[0] // block
    lo = blk * block
    hi = min(lo + block, n_real)
    sel = order[lo:hi][cand[lo:hi]]
    # first minimum in scan order
    k = int(np.argmin(rc[sel]))
    return int(sel[k]), int((start + hi) % n_real)


_price = jit(_price_loop) if USE_NUMBA else _price_numpy


def _detach(x, p, first_child, next_sib, prev_sib):
    if prev_sib[x] >= 0:
        next_sib[prev_sib[x]] = next_sib[x]
    else:
        first_child[p] = next_sib[x]
    if next_sib[x] >= 0:
        prev_sib[next_sib[x]] = prev_sib[x]
    prev_sib[x] = -1
    next_sib[x] = -1


def _attach(x, p, first_child, next_sib, prev_sib):
    f = first_child[p]
    next_sib[x] = f
    if f >= 0:
        prev_sib[f] = x
    first_child[p] = x
    prev_sib[x] = -1


def _refresh_subtree(top, parent, pred, up, depth, pi, cost, first_child, next_sib, stack):
    """Recompute potentials and depths below ``top`` from its parent down."""
    sp = 0
    stack[0] = top
    sp = 1
    while sp > 0:
        sp -= 1
        x = stack[sp]
        p = parent[x]
        c = cost[pred[x]]
        if up[x]:
            pi[x] = pi[p] - c
        else:
            pi[x] = pi[p] + c
        depth[x] = depth[p] + 1
        ch = first_child[x]
        while ch >= 0:
            stack[sp] = ch
            sp += 1
            ch = next_sib[ch]


_detach_j = jit(_detach)
_attach_j = jit(_attach)
_refresh_j = jit(_refresh_subtree)


def _simplex_loop(cost_mat, a, b, bland, max_iter):
    n, m = cost_mat.shape
    n_real = n * m
    n_nodes = n + m + 1
    root = n + m
    n_arcs = n_real + n + m

    scale = 0.0
    for i in range(n):
        for j in range(m):
            if cost_mat[i, j] > scale:
                scale = cost_mat[i, j]
    if scale <= 0.0:
        scale = 1.0
    art = 2.0 * (n + m + 1)

    cost = np.empty(n_arcs)
    src = np.empty(n_arcs, np.int64)
    tgt = np.empty(n_arcs, np.int64)
    flow = np.zeros(n_arcs)
    state = np.zeros(n_arcs, np.int8)
    for i in range(n):
        for j in range(m):
            e = i * m + j
            cost[e] = cost_mat[i, j] / scale
            src[e] = i
            tgt[e] = n + j

    parent = np.full(n_nodes, -1, np.int64)
    pred = np.full(n_nodes, -1, np.int64)
    up = np.zeros(n_nodes, np.bool_)
    depth = np.zeros(n_nodes, np.int64)
    pi = np.zeros(n_nodes)
    first_child = np.full(n_nodes, -1, np.int64)
    next_sib = np.full(n_nodes, -1, np.int64)
    prev_sib = np.full(n_nodes, -1, np.int64)
    stack = np.empty(n_nodes, np.int64)

    for k in range(n + m):
        e = n_real + k
        supply = a[k] if k < n else -b[k - n]
        parent[k] = root
        pred[k] = e
        depth[k] = 1
        state[e] = 1
        if supply > 0.0:
            src[e] = k
            tgt[e] = root
            cost[e] = 0.0
            flow[e] = supply
            up[k] = True
            pi[k] = 0.0
        else:
            src[e] = root
            tgt[e] = k
            cost[e] = art
            flow[e] = -supply
            up[k] = False
            pi[k] = art
        _attach_j(k, root, first_child, next_sib, prev_sib)

    block = 1
    if not bland:
        block = int(math.sqrt(n_real))
        if block < 10:
            block = 10
        if block > n_real:
            block = n_real

    status = STATUS_OPTIMAL
    it = 0
    start = 0
    while True:
        if bland:
            start = 0
        e_in, start = _price(cost, pi, state, n, m, start, block, PRICE_EPS)
        if e_in < 0:
            # potentials drift under incremental updates; rebuild and re-price
            _refresh_all(root, parent, pred, up, depth, pi, cost, first_child, next_sib, stack)
            e_in, start = _price(cost, pi, state, n, m, 0, block, PRICE_EPS)
            if e_in < 0:
                break
        if it >= max_iter:
            status = STATUS_MAX_ITER
            break
        it += 1

        u = src[e_in]
        v = tgt[e_in]
        x = u
        y = v
        while x != y:
            if depth[x] > depth[y]:
                x = parent[x]
            elif depth[y] > depth[x]:
                y = parent[y]
            else:
                x = parent[x]
                y = parent[y]
        join = x

        delta = np.inf
        u_out = -1
        side = 0
        x = u
        while x != join:
            if up[x]:
                d = flow[pred[x]]
                if d < delta:
                    delta = d
                    u_out = x
                    side = 1
            x = parent[x]
        x = v
        while x != join:
            if not up[x]:
                d = flow[pred[x]]
                if d <= delta:
                    delta = d
                    u_out = x
                    side = 2
            x = parent[x]
        if u_out < 0:
            status = STATUS_UNBOUNDED
            break

        if delta > 0.0:
            flow[e_in] += delta
            x = u
            while x != join:
                if up[x]:
                    flow[pred[x]] -= delta
                else:
                    flow[pred[x]] += delta
                x = parent[x]
            x = v
            while x != join:
                if up[x]:
                    flow[pred[x]] += delta
                else:
                    flow[pred[x]] -= delta
                x = parent[x]
        e_out = pred[u_out]
        flow[e_out] = 0.0
        state[e_out] = 0
        state[e_in] = 1

        if side == 1:
            q = u
            p_new = v
        else:
            q = v
            p_new = u
        # re-hang the cut subtree: reverse the path q -> u_out
        x = q
        new_par = p_new
        new_arc = e_in
        while True:
            old_par = parent[x]
            old_arc = pred[x]
            _detach_j(x, old_par, first_child, next_sib, prev_sib)
            parent[x] = new_par
            pred[x] = new_arc
            up[x] = src[new_arc] == x
            _attach_j(x, new_par, first_child, next_sib, prev_sib)
            if x == u_out:
                break
            new_par = x
            new_arc = old_arc
            x = old_par
        _refresh_j(q, parent, pred, up, depth, pi, cost, first_child, next_sib, stack)

    residual = 0.0
    for k in range(n + m):
        f = flow[n_real + k]
        if f > residual:
            residual = f
    out = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            out[i, j] = flow[i * m + j]
    return out, pi[: n + m] * scale, it, status, residual


def _refresh_all_loop(root, parent, pred, up, depth, pi, cost, first_child, next_sib, stack):
    pi[root] = 0.0
    depth[root] = 0
    ch = first_child[root]
    while ch >= 0:
        _refresh_j(ch, parent, pred, up, depth, pi, cost, first_child, next_sib, stack)
        ch = next_sib[ch]


_refresh_all = jit(_refresh_all_loop)
_simplex = jit(_simplex_loop)


def transport_simplex(cost, a, b, bland=False, max_iter=None):
    """Solve ``min <cost, P>`` over couplings of ``a`` and ``b``.

    Returns ``(plan, potentials, iterations, status, artificial_residual)``.
    ``a`` and ``b`` must have equal sums.
    """
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    n, m = cost.shape
    if max_iter is None:
        max_iter = 50 * n * m + 10_000
    return _simplex(cost, a, b, bool(bland), int(max_iter))


def sqdist(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if USE_NUMBA:
        return sqdist_numba(x, y)
    return sqdist_numpy(x, y)


def project_capped_simplex(y: np.ndarray, cap: float) -> np.ndarray:
    y = np.ascontiguousarray(y, dtype=np.float64)
    if USE_NUMBA:
        return project_numba(y, float(cap))
    return project_numpy(y, float(cap))
