"""Fit-once, score-many drift detector."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .calibration import (
    MIN_PERMUTATIONS,
    NormalFit,
    NullSamples,
    ShiftedGammaFit,
    bootstrap_null,
    empirical_p_value,
    fit_normal,
    fit_shifted_gamma,
    resolve_kernel,
)
from .exceptions import DimensionMismatchError, InvalidParameterError, ZeroVarianceError
from .mmd import KernelSpec
from .numerics import SampleSet, as_samples, squared_distances
from .ot import DUMMY_MULTIPLIER, PartialOtResult
from .statistics import KERNEL_KINDS, StatisticSpec, evaluate_sq


@dataclass(frozen=True)
class DetectorConfig:
    spec: StatisticSpec
    n_test: int
    permutations: int = 1000
    p_threshold: float = 0.01
    dummy_multiplier: float = DUMMY_MULTIPLIER
    seed: int = 0
    match_fraction: float = 1.0
    fit_kind: str = "shifted-gamma"

    def __post_init__(self):
        if self.permutations < MIN_PERMUTATIONS:
            raise InvalidParameterError(f"permutations must be at least {MIN_PERMUTATIONS}")
        if not 0.0 < self.p_threshold < 1.0:
            raise InvalidParameterError("p_threshold must lie in (0, 1)")
        if self.n_test < 1:
            raise InvalidParameterError("n_test must be positive")
        if self.fit_kind not in ("shifted-gamma", "normal"):
            raise InvalidParameterError(f"unknown fit kind {self.fit_kind!r}")


@dataclass(frozen=True, eq=False)
class Detector:
    config: DetectorConfig
    reference: SampleSet
    spec: StatisticSpec  # effective spec (dummy multiplier, resolved alpha)
    kernel: KernelSpec | None
    alpha: float
    null_alpha: float
    n_ref: int
    null_samples: NullSamples
    null_fit: ShiftedGammaFit | NormalFit | None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def empirical_only(self) -> bool:
        return self.null_fit is None

    def _sq_ref(self) -> np.ndarray:
        # benign race: two threads may both compute the same array
        sq = self._cache.get("sq_ref")
        if sq is None:
            sq = squared_distances(self.reference, self.reference)
            sq.setflags(write=False)
            self._cache["sq_ref"] = sq
        return sq


@dataclass
class DetectionReport:
    statistic: float
    p_value: float
    empirical_p_value: float
    drift_detected: bool
    kind: str
    alpha: float | None
    p: float
    p_threshold: float
    n_reference: int
    n_test: int
    calibrated_n_ref: int
    calibrated_n_test: int
    warnings: list[str] = field(default_factory=list)
    attribution: dict[str, Any] | None = None
    detail: Any = field(default=None, repr=False)

    def to_dict(self) -> dict[str, Any]:
        out = {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "empirical_p_value": self.empirical_p_value,
            "drift_detected": self.drift_detected,
            "spec": {"kind": self.kind, "alpha": self.alpha, "p": self.p},
            "p_threshold": self.p_threshold,
            "sizes": {
                "n_reference": self.n_reference,
                "n_test": self.n_test,
                "calibrated_n_ref": self.calibrated_n_ref,
                "calibrated_n_test": self.calibrated_n_test,
            },
            "warnings": list(self.warnings),
        }
        if self.attribution is not None:
            out.update(self.attribution)
        return out


def resolve_alpha(spec: StatisticSpec, n_test: int, n_reference: int, match_fraction: float = 1.0) -> float:
    if spec.alpha is not None:
        return float(spec.alpha)
    return min(1.0, match_fraction * n_test / n_reference)


def null_alpha_for(alpha: float, n_reference: int, n_ref: int) -> float:
    """Bootstrap alpha keeping the matched reference count ``alpha * n`` fixed."""
    return min(1.0, alpha * n_reference / n_ref)


def _fit(samples: NullSamples, kind: str):
    return fit_shifted_gamma(samples) if kind == "shifted-gamma" else fit_normal(samples)


def fit_detector(config: DetectorConfig, reference, *, null_samples: NullSamples | None = None) -> Detector:
    """Resolve kernel and alpha, bootstrap the null from the reference, fit it.

    The bootstrap uses ``reference.n - n_test`` points as pseudo-reference;
    scoring later uses the whole reference. A constant null leaves
    ``null_fit=None`` and the detector falls back to empirical p-values.
    """
    reference = as_samples(reference)
    if reference.n < config.n_test + 1:
        raise InvalidParameterError(f"reference of {reference.n} points is too small for test size {config.n_test}")
    spec = replace(config.spec, dummy_multiplier=config.dummy_multiplier)
    kernel = resolve_kernel(spec, reference)
    alpha = resolve_alpha(spec, config.n_test, reference.n, config.match_fraction)
    n_ref = reference.n - config.n_test
    null_alpha = null_alpha_for(alpha, reference.n, n_ref)
    if null_samples is None:
        null_samples = bootstrap_null(
            reference, spec, n_ref, config.n_test, config.permutations, config.seed, kernel=kernel, alpha=null_alpha
        )
    try:
        null_fit = _fit(null_samples, config.fit_kind)
    except ZeroVarianceError:
        null_fit = None
    return Detector(config, reference, spec, kernel, alpha, null_alpha, n_ref, null_samples, null_fit)


def score_batch(det: Detector, batch, *, attribute: bool = False, p_threshold: float | None = None) -> DetectionReport:
    """Statistic between the full reference and ``batch`` plus both p-values."""
    batch = as_samples(batch)
    if batch.d != det.reference.d:
        raise DimensionMismatchError(f"batch dimension {batch.d} != reference dimension {det.reference.d}")
    spec = det.spec
    sq_xy = squared_distances(det.reference, batch)
    kernel_kind = spec.kind in KERNEL_KINDS
    sq_xx = det._sq_ref() if kernel_kind else None
    sq_yy = squared_distances(batch, batch) if kernel_kind else None
    rng = np.random.default_rng(det.config.seed) if spec.kind == "partial-mmd-adhoc" else None
    res = evaluate_sq(spec, det.kernel, det.alpha, sq_xy, sq_xx, sq_yy, rng)
    stat = float(res.value)

    emp = empirical_p_value(det.null_samples, stat)
    pv = emp if det.null_fit is None else min(1.0, max(0.0, det.null_fit.sf(stat)))
    thr = det.config.p_threshold if p_threshold is None else float(p_threshold)
    warnings = []
    if batch.n != det.config.n_test:
        warnings.append(f"batch size {batch.n} differs from calibrated test size {det.config.n_test}")
    if det.null_fit is None:
        warnings.append("degenerate null distribution; p_value is the empirical p-value")

    attribution = None
    if attribute:
        attribution = _attribution_payload(det, batch, res.detail)
    return DetectionReport(
        statistic=stat,
        p_value=pv,
        empirical_p_value=emp,
        drift_detected=pv < thr,
        kind=spec.kind,
        alpha=det.alpha if spec.is_partial else None,
        p=spec.p,
        p_threshold=thr,
        n_reference=det.reference.n,
        n_test=batch.n,
        calibrated_n_ref=det.n_ref,
        calibrated_n_test=det.config.n_test,
        warnings=warnings,
        attribution=attribution,
        detail=res.detail,
    )


def drift_score(report: DetectionReport, det: Detector | None = None) -> float:
    """``-log p`` without underflow saturation (monotone in the statistic)."""
    if det is not None and det.null_fit is not None:
        return -det.null_fit.logsf(report.statistic)
    return -math.log(max(report.p_value, 1e-300))


def _attribution_payload(det: Detector, batch: SampleSet, detail) -> dict[str, Any]:
    from .attribution import coupling_attribution, witness_values, full_coupling_result
    from .partial_mmd import PartialMmdResult

    out: dict[str, Any] = {}
    ot_res = None
    if isinstance(detail, PartialOtResult):
        ot_res = detail
    elif det.spec.kind == "wasserstein":
        ot_res = full_coupling_result(detail, squared_distances(det.reference, batch), det.spec.p)
    if ot_res is not None:
        out["matches"] = [a.to_dict() for a in coupling_attribution(ot_res)]
        out["transport_cost"] = ot_res.distance**ot_res.p
    if det.kernel is not None:
        m = batch.n
        v = np.full(m, 1.0 / m)
        if isinstance(detail, PartialMmdResult):
            w = detail.weights
        elif ot_res is not None:
            w = ot_res.reference_weights
        else:
            w = np.full(det.reference.n, 1.0 / det.reference.n)
        wit = witness_values(det.reference, batch, w, v, det.kernel, batch)
        out["witness"] = [float(x) for x in wit]
    return out
