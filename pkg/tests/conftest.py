import sys
from pathlib import Path

import numpy as np
import pytest

import driftbridge
import driftbridge.ot as ot_module

sys.path.insert(0, str(Path(__file__).parent))

# Every coupling produced in-process passes through this wrapper so marginal
# conservation is checked suite-wide, not only in the OT tests.
COUPLING_LOG: list[float] = []
_test_log: list[float] = []
_solve = ot_module.solve_discrete_ot


def _recording_solve(cost, mu, nu, **kw):
    c = _solve(cost, mu, nu, **kw)
    err = c.marginal_error()
    COUPLING_LOG.append(err)
    _test_log.append(err)
    return c


ot_module.solve_discrete_ot = _recording_solve
driftbridge.solve_discrete_ot = _recording_solve


@pytest.fixture(autouse=True)
def _marginals_conserved():
    _test_log.clear()
    yield
    if _test_log:
        assert max(_test_log) < 1e-8, f"coupling marginal error {max(_test_log):.3g}"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# Acceptance criteria register here and are echoed as one line each at the end
# of the run, whatever the capture mode.
ACCEPTANCE: dict[int, tuple[bool, str, str]] = {}


def record_acceptance(number: int, title: str, ok: bool, detail: str) -> None:
    ACCEPTANCE[number] = (bool(ok), title, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE and not COUPLING_LOG:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[n]
        tr.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {n:2d}: {title}: {detail}")
    if COUPLING_LOG:
        tr.write_line(f"suite-wide couplings: {len(COUPLING_LOG)}, max marginal error {max(COUPLING_LOG):.3g}")
