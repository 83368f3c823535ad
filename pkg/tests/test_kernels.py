"""Compiled kernels against their numpy forms and against independent references."""

import json
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from driftbridge import _kernels
from driftbridge._accel import USE_NUMBA, backend_name, thread_count
from oracles import lp_transport


def _capped_projection_oracle(y, cap):
    """Bisection on tau in float128-free plain Python, tolerance far below the test bound."""
    lo, hi = float(np.min(y) - cap), float(np.max(y))
    for _ in range(200):
        tau = 0.5 * (lo + hi)
        s = float(np.clip(y - tau, 0.0, cap).sum())
        if s > 1.0:
            lo = tau
        else:
            hi = tau
    return np.clip(y - 0.5 * (lo + hi), 0.0, cap)


@pytest.mark.parametrize("impl", ["numba", "numpy"])
def test_sqdist_forms_agree(rng, impl):
    x = rng.normal(size=(30, 6))
    y = rng.normal(size=(11, 6))
    f = _kernels.sqdist_numba if impl == "numba" else _kernels.sqdist_numpy
    ref = ((x[:, None, :] - y[None, :, :]) ** 2).sum(-1)
    np.testing.assert_allclose(f(x, y), ref, rtol=1e-12, atol=1e-12)


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 40), st.floats(0.05, 1.0), st.integers(0, 2**32 - 1))
def test_projection_forms_match_oracle(n, frac, seed):
    g = np.random.default_rng(seed)
    y = g.normal(scale=3.0, size=n)
    cap = max(1.0 / n, 1.0 / (frac * n))
    ref = _capped_projection_oracle(y, cap)
    for f in (_kernels.project_numba, _kernels.project_numpy):
        w = f(y, cap)
        assert abs(w.sum() - 1.0) < 1e-12
        assert w.min() >= 0.0 and w.max() <= cap + 1e-15
        np.testing.assert_allclose(w, ref, atol=1e-10)


def test_projection_is_closest_point(rng):
    # first-order optimality: y - w = tau on the free set, >= tau at the cap, <= tau at zero
    y = 0.05 * rng.normal(size=25)
    cap = 0.08
    w = _kernels.project_capped_simplex(y, cap)
    r = y - w
    free = (w > 1e-12) & (w < cap - 1e-12)
    assert free.sum() >= 2
    tau = r[free].mean()
    np.testing.assert_allclose(r[free], tau, atol=1e-12)
    assert np.all(r[w <= 1e-12] <= tau + 1e-12)
    assert np.all(r[w >= cap - 1e-12] >= tau - 1e-12)


@pytest.mark.parametrize("bland", [False, True])
def test_simplex_matches_lp(rng, bland):
    for _ in range(25):
        n, m = rng.integers(1, 9, size=2)
        C = rng.random((n, m)) * rng.choice([1.0, 1e-3, 1e3])
        if rng.random() < 0.3:
            C = np.round(C * 3) / 3  # many ties
        a = rng.random(n) + (rng.random(n) < 0.2) * 0.0
        a[rng.random(n) < 0.2] = 0.0
        a = a + 1e-300 if a.sum() == 0 else a
        a /= a.sum()
        b = rng.random(m)
        b /= b.sum()
        plan, _, _, status, resid = _kernels.transport_simplex(C, a, b, bland=bland)
        assert status == _kernels.STATUS_OPTIMAL and resid < 1e-12
        ref, _ = lp_transport(C, a, b)
        assert abs(np.sum(C * plan) - ref) <= 1e-9 * max(1.0, abs(ref))
        np.testing.assert_allclose(plan.sum(1), a, atol=1e-12)
        np.testing.assert_allclose(plan.sum(0), b, atol=1e-12)


def test_simplex_duals_certify_optimality(rng):
    C = rng.random((9, 6))
    a = np.full(9, 1 / 9)
    b = np.full(6, 1 / 6)
    plan, pi, _, status, _ = _kernels.transport_simplex(C, a, b)
    assert status == 0
    # reduced costs c_ij + u_i - v_j are nonnegative, zero on the support
    u, v = pi[:9], pi[9:15]
    red = C + u[:, None] - v[None, :]
    assert red.min() > -1e-9
    assert np.all(np.abs(red[plan > 1e-12]) < 1e-9)


def test_backend_flags():
    assert backend_name() in ("numba", "numpy")
    assert backend_name() == ("numba" if USE_NUMBA else "numpy")
    assert thread_count() >= 1


_SUBPROCESS_SCRIPT = r"""
import json, numpy as np
from driftbridge import _kernels, backend_name
from driftbridge.ot import partial_wasserstein
g = np.random.default_rng(3)
X = g.normal(size=(60, 5)); Y = g.normal(size=(9, 5)) + 0.3
res = partial_wasserstein(X, Y, 0.15, 2.0)
w = _kernels.project_capped_simplex(g.normal(size=40), 0.05)
print(json.dumps({"backend": backend_name(), "distance": res.distance,
                  "proj": w.tolist(), "sq": _kernels.sqdist(X[:3], Y[:2]).tolist()}))
"""


def _run_backend(name):
    env = dict(os.environ, DRIFTBRIDGE_BACKEND=name)
    out = subprocess.run([sys.executable, "-c", _SUBPROCESS_SCRIPT], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def test_numpy_fallback_matches_numba_backend():
    a = _run_backend("numba")
    b = _run_backend("numpy")
    assert a["backend"] == "numba" and b["backend"] == "numpy"
    assert abs(a["distance"] - b["distance"]) <= 1e-12 * a["distance"]
    np.testing.assert_allclose(a["proj"], b["proj"], atol=1e-14)
    np.testing.assert_allclose(a["sq"], b["sq"], rtol=1e-13)
