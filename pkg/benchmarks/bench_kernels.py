"""Time the hot kernels under both backends.

    python benchmarks/bench_kernels.py [--repeat N]

Each backend runs in its own interpreter because DRIFTBRIDGE_BACKEND is read
at import. Compilation is excluded: every case is called once before timing.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

CASES = ("sqdist 1000x50 d=32", "projection n=1000", "simplex 50x50", "simplex 300x50", "partial W 1000x50 d=32")


def _measure(repeat: int) -> dict[str, float]:
    import numpy as np

    from driftbridge import _kernels, partial_wasserstein

    g = np.random.default_rng(0)
    X = g.normal(size=(1000, 32))
    Y = g.normal(size=(50, 32)) + 0.3
    cost_small = _kernels.sqdist(g.normal(size=(50, 2)), g.normal(size=(50, 2)))
    cost_tall = _kernels.sqdist(g.normal(size=(300, 2)), g.normal(size=(50, 2)))
    y = g.normal(size=1000)
    calls = {
        CASES[0]: lambda: _kernels.sqdist(X, Y),
        CASES[1]: lambda: _kernels.project_capped_simplex(y, 0.005),
        CASES[2]: lambda: _kernels.transport_simplex(cost_small, np.full(50, 0.02), np.full(50, 0.02)),
        CASES[3]: lambda: _kernels.transport_simplex(cost_tall, np.full(300, 1 / 300), np.full(50, 0.02)),
        CASES[4]: lambda: partial_wasserstein(X, Y, 0.05, 2.0),
    }
    out = {}
    for name, f in calls.items():
        f()
        best = float("inf")
        for _ in range(repeat):
            t0 = time.perf_counter()
            f()
            best = min(best, time.perf_counter() - t0)
        out[name] = best
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    a = ap.parse_args(argv)
    if a.child:
        print(json.dumps(_measure(a.repeat)))
        return 0
    results = {}
    for backend in ("numba", "numpy"):
        env = dict(os.environ, DRIFTBRIDGE_BACKEND=backend)
        proc = subprocess.run(
            [sys.executable, __file__, "--child", "--repeat", str(a.repeat)], env=env, capture_output=True, text=True, check=True
        )
        results[backend] = json.loads(proc.stdout)
    print(f"{'kernel':<26}{'numba ms':>12}{'numpy ms':>12}{'ratio':>9}")
    for name in CASES:
        nb, npy = results["numba"][name], results["numpy"][name]
        print(f"{name:<26}{1e3 * nb:>12.3f}{1e3 * npy:>12.3f}{npy / nb:>9.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
