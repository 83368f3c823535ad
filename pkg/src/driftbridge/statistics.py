"""Test statistics evaluated on squared-distance blocks.

All six detectors reduce to functions of three squared-distance blocks
(reference x test, reference x reference, test x test), so callers that hold
a precomputed pool matrix just slice it.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Any

import numpy as np

from .exceptions import InvalidParameterError
from .mmd import FAMILIES, KernelSpec, MmdParts
from .ot import DUMMY_MULTIPLIER, partial_wasserstein_sq, wasserstein_sq
from .partial_mmd import _two_stage_from_sq, partial_mmd_adhoc, partial_mmd_qp

KINDS = (
    "wasserstein",
    "partial-wasserstein",
    "mmd",
    "partial-mmd-two-stage",
    "partial-mmd-adhoc",
    "partial-mmd-qp",
)
PARTIAL_KINDS = frozenset(k for k in KINDS if k.startswith("partial"))
KERNEL_KINDS = frozenset(k for k in KINDS if "mmd" in k)
TRANSPORT_KINDS = frozenset({"wasserstein", "partial-wasserstein", "partial-mmd-two-stage"})


@dataclass(frozen=True)
class StatisticSpec:
    """Which statistic to compute and with which parameters.

    ``alpha=None`` defers the match fraction to the detector (test size over
    reference size). ``lengthscale=None`` means the median heuristic on the
    reference sample.
    """

    kind: str = "mmd"
    alpha: float | None = None
    p: float = 2.0
    kernel_family: str = "squared-exponential"
    lengthscale: float | None = None
    dummy_multiplier: float = DUMMY_MULTIPLIER
    adhoc_iters: int = 50
    qp_tol: float = 1e-8

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameterError(f"unknown statistic kind {self.kind!r}; choose from {KINDS}")
        if self.alpha is not None and not 0.0 < self.alpha <= 1.0:
            raise InvalidParameterError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not self.p > 0:
            raise InvalidParameterError(f"p must be positive, got {self.p}")
        if self.kernel_family not in FAMILIES:
            raise InvalidParameterError(f"unknown kernel family {self.kernel_family!r}")
        if self.lengthscale is not None and not self.lengthscale > 0:
            raise InvalidParameterError("lengthscale must be positive")

    @property
    def is_partial(self) -> bool:
        return self.kind in PARTIAL_KINDS

    @property
    def kernel(self) -> KernelSpec | str:
        if self.lengthscale is None:
            return "auto"
        return KernelSpec(self.kernel_family, self.lengthscale)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "StatisticSpec":
        fields = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        return cls(**fields)


@dataclass
class StatisticValue:
    value: float
    detail: Any = None  # transport result or partial-MMD result, when there is one


def evaluate_sq(
    spec: StatisticSpec,
    kernel: KernelSpec | None,
    alpha: float,
    sq_xy: np.ndarray,
    sq_xx: np.ndarray | None,
    sq_yy: np.ndarray | None,
    rng: np.random.Generator | None = None,
) -> StatisticValue:
    """Evaluate ``spec`` between reference X and test Y given squared distances.

    Kernel statistics are squared norms, so rounding below zero is clamped to 0.
    """
    kind = spec.kind
    p = spec.p
    if kind == "wasserstein":
        dist, coupling = wasserstein_sq(sq_xy, p)
        return StatisticValue(dist, coupling)
    if kind == "partial-wasserstein":
        res = partial_wasserstein_sq(sq_xy, alpha, p, spec.dummy_multiplier)
        return StatisticValue(res.distance, res)
    if kernel is None:
        raise InvalidParameterError(f"{kind} needs a resolved kernel")
    if kind == "mmd":
        val = kernel.from_sq(sq_xx).mean() + kernel.from_sq(sq_yy).mean() - 2.0 * kernel.from_sq(sq_xy).mean()
        return StatisticValue(max(float(val), 0.0))
    if kind == "partial-mmd-two-stage":
        value, w, ot_res = _two_stage_from_sq(
            sq_xy, lambda idx: sq_xx[np.ix_(idx, idx)], sq_yy, alpha, p, kernel, spec.dummy_multiplier
        )
        return StatisticValue(max(value, 0.0), ot_res)
    parts = MmdParts(kernel.from_sq(sq_xx), kernel.from_sq(sq_yy), kernel.from_sq(sq_xy.T))
    if kind == "partial-mmd-adhoc":
        res = partial_mmd_adhoc(parts, alpha, spec.adhoc_iters, rng if rng is not None else 0)
    else:
        res = partial_mmd_qp(parts, alpha, spec.qp_tol)
    return StatisticValue(max(res.value, 0.0), res)


def needs_reference_block(spec: StatisticSpec) -> bool:
    return spec.kind in KERNEL_KINDS
