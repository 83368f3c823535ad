"""Backend selection for the compiled kernels.

``DRIFTBRIDGE_BACKEND=numpy`` (or a missing numba install) routes every hot
kernel through its pure numpy/Python path. Anything else uses numba.
``DRIFTBRIDGE_THREADS`` caps internal parallelism (0 or unset = auto).
"""

from __future__ import annotations

import os

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    _HAVE_NUMBA = False

BACKEND = os.environ.get("DRIFTBRIDGE_BACKEND", "numba").strip().lower()
USE_NUMBA = _HAVE_NUMBA and BACKEND != "numpy"


def jit(func):
    """``numba.njit(cache=True)`` when enabled, identity otherwise."""
    if USE_NUMBA:
        return numba.njit(cache=True, nogil=True)(func)
    return func


def thread_count() -> int:
    raw = os.environ.get("DRIFTBRIDGE_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        n = os.cpu_count() or 1
    return n


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
