"""Desk-scale drift experiment on synthetic clustered features.

A ``SyntheticWorld`` stands in for a class-structured feature space. Each
experiment fits every detector once on a balanced reference draw, then scores
clean and corrupted batches in balanced and single-class (imbalanced) modes.
ROC curves pool both modes: clean draws are negatives, corrupted draws
positives, and the score is ``-log p``.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, replace
from typing import Any

import numpy as np

from .detector import DetectorConfig, drift_score, fit_detector, score_batch
from .exceptions import InvalidParameterError
from .numerics import SampleSet, make_rng
from .statistics import StatisticSpec

SEVERITY_NOISE = {0: 0.0, 1: 0.5, 2: 1.0, 3: 2.0}
CONDITIONS = ("balanced-clean", "imbalanced-clean", "balanced-corrupted", "imbalanced-corrupted")
DEFAULT_DETECTORS = ("mmd", "wasserstein", "partial-wasserstein", "partial-mmd-two-stage")

# seed streams
_WORLD, _REFERENCE, _DRAW, _NOISE, _DETECTOR = range(5)


@dataclass(frozen=True)
class SyntheticWorld:
    """Gaussian clusters; ``spread`` is the RMS distance of a point from its centre."""

    centers: np.ndarray
    spread: float
    seed: int

    @property
    def classes(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]


def make_world(classes: int = 10, dim: int = 32, spread: float = 1.0, separation: float = 4.0, seed: int = 0) -> SyntheticWorld:
    """Standard-normal centres rescaled so the closest pair sits ``separation * spread`` apart."""
    if classes < 2:
        raise InvalidParameterError("need at least two classes")
    if dim < 1 or not spread > 0:
        raise InvalidParameterError("dim must be positive and spread > 0")
    if separation < 4.0:
        raise InvalidParameterError("separation below 4 spreads makes clusters overlap")
    rng = make_rng(seed, _WORLD)
    c = rng.standard_normal((classes, dim))
    d = np.sqrt(((c[:, None, :] - c[None, :, :]) ** 2).sum(-1))
    closest = d[np.triu_indices(classes, 1)].min()
    return SyntheticWorld(c * (separation * spread / closest), float(spread), int(seed))


def draw_batch(world: SyntheticWorld, size: int, mode: str = "balanced", cls: int | None = None, seed=0, *, return_labels=False):
    """Fresh points; balanced mode draws classes uniformly with replacement, imbalanced mode uses ``cls`` only."""
    if size < 1:
        raise InvalidParameterError("batch size must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed, _DRAW)
    if mode == "balanced":
        labels = rng.integers(0, world.classes, size)
    elif mode == "imbalanced":
        if cls is None or not 0 <= cls < world.classes:
            raise InvalidParameterError(f"unknown class {cls!r}")
        labels = np.full(size, int(cls))
    else:
        raise InvalidParameterError(f"unknown draw mode {mode!r}")
    pts = world.centers[labels] + rng.standard_normal((size, world.dim)) * (world.spread / np.sqrt(world.dim))
    batch = SampleSet(pts)
    return (batch, labels) if return_labels else batch


def corrupt(batch, severity: int, spread: float, seed=0) -> SampleSet:
    """Additive isotropic noise with per-coordinate sd ``{0, .5, 1, 2}[severity] * spread``."""
    if severity not in SEVERITY_NOISE:
        raise InvalidParameterError(f"severity must be one of {sorted(SEVERITY_NOISE)}")
    pts = batch.points if isinstance(batch, SampleSet) else np.asarray(batch, dtype=np.float64)
    if severity == 0:
        return batch if isinstance(batch, SampleSet) else SampleSet(pts)
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed, _NOISE)
    return SampleSet(pts + rng.standard_normal(pts.shape) * (SEVERITY_NOISE[severity] * spread))


def roc_auc(scores_positive, scores_negative) -> float:
    """Fraction of (positive, negative) pairs ranked correctly; ties count one half."""
    pos = np.asarray(scores_positive, dtype=np.float64).ravel()
    neg = np.sort(np.asarray(scores_negative, dtype=np.float64).ravel())
    if pos.size == 0 or neg.size == 0:
        raise InvalidParameterError("roc_auc needs nonempty positive and negative scores")
    below = np.searchsorted(neg, pos, side="left")
    ties = np.searchsorted(neg, pos, side="right") - below
    # doubled pair count stays integral
    twice = 2 * int(below.sum()) + int(ties.sum())
    return twice / (2 * pos.size * neg.size)


def roc_curve(scores_positive, scores_negative) -> tuple[np.ndarray, np.ndarray]:
    """(fpr, tpr) over every distinct threshold, from (0, 0) to (1, 1)."""
    pos = np.asarray(scores_positive, dtype=np.float64)
    neg = np.asarray(scores_negative, dtype=np.float64)
    thr = np.unique(np.concatenate([pos, neg]))[::-1]
    tpr = [0.0] + [float(np.mean(pos >= t)) for t in thr]
    fpr = [0.0] + [float(np.mean(neg >= t)) for t in thr]
    return np.asarray(fpr), np.asarray(tpr)


@dataclass
class ExperimentConfig:
    n_reference: int = 1000
    n_test: int = 50
    alpha: float | None = None
    match_fraction: float = 1.0
    corruption_severity: int = 2
    draws_per_condition: int = 100
    detectors: list[StatisticSpec] = field(default_factory=lambda: [StatisticSpec(k) for k in DEFAULT_DETECTORS])
    permutations: int = 300
    p_threshold: float = 0.01
    classes: int = 10
    dim: int = 32
    spread: float = 1.0
    separation: float = 4.0
    seed: int = 0

    def __post_init__(self):
        if min(self.n_reference, self.n_test, self.draws_per_condition) < 1:
            raise InvalidParameterError("experiment counts must be positive")
        if self.corruption_severity not in SEVERITY_NOISE:
            raise InvalidParameterError("corruption_severity must be 0..3")
        self.detectors = [d if isinstance(d, StatisticSpec) else _spec_from_json(d) for d in self.detectors]

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["detectors"] = [s.to_dict() for s in self.detectors]
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ExperimentConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidParameterError(f"unknown experiment config keys: {sorted(unknown)}")
        return cls(**d)


def _spec_from_json(d) -> StatisticSpec:
    if isinstance(d, str):
        return StatisticSpec(d)
    return StatisticSpec.from_dict(d)


def detector_label(spec: StatisticSpec) -> str:
    return spec.kind


@dataclass
class DetectorOutcome:
    label: str
    spec: StatisticSpec
    auc: float
    roc_fpr: np.ndarray
    roc_tpr: np.ndarray
    p_values: dict[str, np.ndarray]
    statistics: dict[str, np.ndarray]
    scores: dict[str, np.ndarray]
    fit_seconds: float = 0.0
    score_seconds: float = 0.0

    def histogram(self, condition: str, bins: int = 10) -> list[int]:
        counts, _ = np.histogram(self.p_values[condition], bins=bins, range=(0.0, 1.0))
        return [int(c) for c in counts]

    def mean_p(self, condition: str) -> float:
        return float(np.mean(self.p_values[condition]))


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    outcomes: dict[str, DetectorOutcome]

    def auc(self, label: str) -> float:
        return self.outcomes[label].auc

    def to_dict(self) -> dict[str, Any]:
        """Deterministic payload (runtimes live in :meth:`timings`)."""
        det = {}
        for label, o in self.outcomes.items():
            det[label] = {
                "spec": o.spec.to_dict(),
                "auc": o.auc,
                "roc": {"fpr": o.roc_fpr.tolist(), "tpr": o.roc_tpr.tolist()},
                "mean_p_value": {c: o.mean_p(c) for c in CONDITIONS},
                "p_value_histogram": {c: o.histogram(c) for c in CONDITIONS},
                "p_values": {c: o.p_values[c].tolist() for c in CONDITIONS},
            }
        return {"config": self.config.to_dict(), "detectors": det}

    def timings(self) -> dict[str, dict[str, float]]:
        return {k: {"fit_seconds": o.fit_seconds, "score_seconds": o.score_seconds} for k, o in self.outcomes.items()}


def _batches(cfg: ExperimentConfig, world: SyntheticWorld) -> dict[str, list[SampleSet]]:
    out = {c: [] for c in CONDITIONS}
    for k in range(cfg.draws_per_condition):
        bal = draw_batch(world, cfg.n_test, "balanced", seed=make_rng(cfg.seed, _DRAW, 0, k))
        imb = draw_batch(world, cfg.n_test, "imbalanced", k % world.classes, seed=make_rng(cfg.seed, _DRAW, 1, k))
        out["balanced-clean"].append(bal)
        out["imbalanced-clean"].append(imb)
        out["balanced-corrupted"].append(
            corrupt(bal, cfg.corruption_severity, world.spread, make_rng(cfg.seed, _NOISE, 0, k))
        )
        out["imbalanced-corrupted"].append(
            corrupt(imb, cfg.corruption_severity, world.spread, make_rng(cfg.seed, _NOISE, 1, k))
        )
    return out


def run_experiment(cfg: ExperimentConfig, progress=None) -> ExperimentReport:
    """Fit each detector once, score every draw, assemble ROC/AUC and p-value summaries."""
    world = make_world(cfg.classes, cfg.dim, cfg.spread, cfg.separation, cfg.seed)
    reference = draw_batch(world, cfg.n_reference, "balanced", seed=make_rng(cfg.seed, _REFERENCE))
    batches = _batches(cfg, world)
    outcomes = {}
    for idx, spec in enumerate(cfg.detectors):
        if cfg.alpha is not None and spec.is_partial:
            spec = replace(spec, alpha=cfg.alpha)
        label = detector_label(spec)
        if label in outcomes:
            label = f"{label}#{idx}"
        t0 = time.perf_counter()
        det = fit_detector(
            DetectorConfig(
                spec,
                cfg.n_test,
                cfg.permutations,
                cfg.p_threshold,
                spec.dummy_multiplier,
                seed=int(np.random.SeedSequence([cfg.seed, _DETECTOR, idx]).generate_state(1)[0]),
                match_fraction=cfg.match_fraction,
            ),
            reference,
        )
        t1 = time.perf_counter()
        pv, st, sc = {}, {}, {}
        for cond in CONDITIONS:
            reports = [score_batch(det, b) for b in batches[cond]]
            pv[cond] = np.array([r.p_value for r in reports])
            st[cond] = np.array([r.statistic for r in reports])
            sc[cond] = np.array([drift_score(r, det) for r in reports])
        t2 = time.perf_counter()
        pos = np.concatenate([sc["balanced-corrupted"], sc["imbalanced-corrupted"]])
        neg = np.concatenate([sc["balanced-clean"], sc["imbalanced-clean"]])
        fpr, tpr = roc_curve(pos, neg)
        outcomes[label] = DetectorOutcome(
            label, spec, roc_auc(pos, neg), fpr, tpr, pv, st, sc, t1 - t0, (t2 - t1) / (4 * cfg.draws_per_condition)
        )
        if progress is not None:
            progress(label, outcomes[label])
    return ExperimentReport(cfg, outcomes)


SWEEP_AXES = ("corruption_severity", "n_test", "match_fraction", "p")


def sweep(cfg: ExperimentConfig, axis: str, values, progress=None) -> dict[Any, ExperimentReport]:
    """One-axis sensitivity run: vary ``axis`` over ``values`` with everything else fixed.

    Varying ``n_test`` keeps the match fraction, so alpha follows the test size;
    varying ``match_fraction`` keeps the test size.
    """
    if axis not in SWEEP_AXES:
        raise InvalidParameterError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")
    out = {}
    for val in values:
        if axis == "p":
            c = replace(cfg, detectors=[replace(s, p=float(val)) for s in cfg.detectors])
        elif axis == "match_fraction":
            c = replace(cfg, match_fraction=float(val))
        else:
            c = replace(cfg, **{axis: int(val)})
        out[val] = run_experiment(c, progress)
    return out
