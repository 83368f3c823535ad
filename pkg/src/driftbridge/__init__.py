"""Drift detection by partial matching: partial Wasserstein and partial MMD detectors."""

from ._accel import backend_name
from .attribution import MatchingExport, TestAttribution, coupling_attribution, export_matching, witness_values
from .calibration import (
    NormalFit,
    NullSamples,
    ShiftedGammaFit,
    bootstrap_null,
    empirical_p_value,
    fit_normal,
    fit_shifted_gamma,
    p_value,
)
from .detector import DetectionReport, Detector, DetectorConfig, drift_score, fit_detector, score_batch
from .exceptions import (
    ConvergenceError,
    DimensionMismatchError,
    DriftBridgeError,
    InfeasibleProblemError,
    InvalidParameterError,
    NotPositiveDefiniteError,
    SolverError,
    ZeroVarianceError,
)
from .harness import (
    ExperimentConfig,
    ExperimentReport,
    SyntheticWorld,
    corrupt,
    draw_batch,
    make_world,
    roc_auc,
    roc_curve,
    run_experiment,
    sweep,
)
from .mmd import KernelSpec, MmdParts, kernel_matrix, median_lengthscale, mmd_sq, weighted_mmd_sq
from .numerics import SampleSet, cholesky_factor, make_rng, pairwise_power_distances, squared_distances
from .ot import (
    Coupling,
    PartialOtResult,
    build_partial_problem,
    partial_wasserstein,
    solve_discrete_ot,
    wasserstein,
)
from .partial_mmd import PartialMmdResult, partial_mmd_adhoc, partial_mmd_qp, partial_mmd_two_stage
from .statistics import KINDS, StatisticSpec

__version__ = "0.1.0"
