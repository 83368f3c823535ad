"""Null distribution of a drift statistic, bootstrapped from reference data only.

Permutation ``i`` shuffles the pool with its own random stream, takes the
first ``n_ref`` points as reference and the next ``n_test`` as test, and
evaluates the statistic. A shifted gamma is then fitted by moments for
parametric p-values.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from ._accel import thread_count
from .exceptions import InvalidParameterError, ZeroVarianceError
from .mmd import KernelSpec, median_lengthscale
from .numerics import SampleSet, as_samples, make_rng, squared_distances
from .statistics import StatisticSpec, evaluate_sq, needs_reference_block

MIN_PERMUTATIONS = 20


@dataclass(frozen=True)
class NullSamples:
    values: np.ndarray
    spec: StatisticSpec
    n_ref: int
    n_test: int
    seed: int
    alpha: float | None = None
    kernel: KernelSpec | None = None

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class ShiftedGammaFit:
    shift: float
    shape: float
    scale: float

    @property
    def mean(self) -> float:
        return self.shift + self.shape * self.scale

    def sf(self, x: float) -> float:
        if x <= self.shift:
            return 1.0
        return float(special.gammaincc(self.shape, (x - self.shift) / self.scale))

    def logsf(self, x: float) -> float:
        """Log upper tail; switches to the leading asymptotic term where ``sf`` underflows."""
        if x <= self.shift:
            return 0.0
        z = (x - self.shift) / self.scale
        q = special.gammaincc(self.shape, z)
        if q > 1e-280:
            return math.log(q)
        a = self.shape
        return (a - 1.0) * math.log(z) - z - special.gammaln(a) + math.log1p((a - 1.0) / z)


@dataclass(frozen=True)
class NormalFit:
    mean: float
    std: float

    def sf(self, x: float) -> float:
        return float(stats.norm.sf(x, self.mean, self.std))

    def logsf(self, x: float) -> float:
        return float(stats.norm.logsf(x, self.mean, self.std))


def resolve_kernel(spec: StatisticSpec, reference) -> KernelSpec | None:
    if not needs_reference_block(spec):
        return None
    k = spec.kernel
    if k == "auto":
        return KernelSpec(spec.kernel_family, median_lengthscale(reference))
    return k


class PoolEvaluator:
    """Evaluates a statistic on index subsets of a fixed pool.

    Squared distances over the whole pool are computed once and sliced per
    permutation.
    """

    def __init__(self, pool: SampleSet, spec: StatisticSpec, kernel: KernelSpec | None, alpha: float | None):
        self.pool = as_samples(pool)
        self.spec = spec
        self.kernel = kernel
        self.alpha = alpha
        self.sq = squared_distances(self.pool, self.pool)

    def __call__(self, ref_idx, test_idx, rng=None) -> float:
        sq = self.sq
        sq_xy = sq[np.ix_(ref_idx, test_idx)]
        sq_xx = sq[np.ix_(ref_idx, ref_idx)] if needs_reference_block(self.spec) else None
        sq_yy = sq[np.ix_(test_idx, test_idx)] if needs_reference_block(self.spec) else None
        return evaluate_sq(self.spec, self.kernel, self.alpha, sq_xy, sq_xx, sq_yy, rng).value


def bootstrap_null(
    pool,
    spec: StatisticSpec,
    n_ref: int,
    n_test: int,
    permutations: int,
    seed: int = 0,
    *,
    kernel: KernelSpec | None = None,
    alpha: float | None = None,
    threads: int | None = None,
) -> NullSamples:
    """Bootstrap the statistic's distribution when the test batch comes from the reference.

    ``kernel`` and ``alpha`` override the spec's values (a detector resolves
    them from the full reference); otherwise ``"auto"`` lengthscales use the
    pool and a missing alpha becomes ``n_test / n_ref``.
    """
    pool = as_samples(pool)
    n_ref, n_test, permutations = int(n_ref), int(n_test), int(permutations)
    if n_ref < 1 or n_test < 1:
        raise InvalidParameterError("n_ref and n_test must be positive")
    if pool.n < n_ref + n_test:
        raise InvalidParameterError(f"pool of {pool.n} points cannot supply {n_ref} + {n_test} samples")
    if permutations < MIN_PERMUTATIONS:
        raise InvalidParameterError(f"need at least {MIN_PERMUTATIONS} permutations, got {permutations}")
    if kernel is None:
        kernel = resolve_kernel(spec, pool)
    if alpha is None:
        alpha = spec.alpha if spec.alpha is not None else min(1.0, n_test / n_ref)

    evaluate = PoolEvaluator(pool, spec, kernel, alpha)

    def one(i: int) -> float:
        rng = make_rng(seed, i)
        perm = rng.permutation(pool.n)
        return evaluate(perm[:n_ref], perm[n_ref : n_ref + n_test], rng)

    workers = thread_count() if threads is None else max(1, int(threads))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            values = list(ex.map(one, range(permutations)))
    else:
        values = [one(i) for i in range(permutations)]
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise InvalidParameterError("bootstrap produced non-finite statistic values")
    return NullSamples(values, spec, n_ref, n_test, int(seed), alpha, kernel)


def _values(samples) -> np.ndarray:
    return samples.values if isinstance(samples, NullSamples) else np.asarray(samples, dtype=np.float64).ravel()


def fit_shifted_gamma(samples) -> ShiftedGammaFit:
    """Shifted gamma by the method of moments.

    The shift estimates the left endpoint from the two smallest order
    statistics, ``2 x(1) - x(2)``; with a tie at the minimum it falls back to
    ``x(1) - 0.001 * range``.
    """
    x = _values(samples)
    if x.size < MIN_PERMUTATIONS:
        raise InvalidParameterError(f"need at least {MIN_PERMUTATIONS} null values, got {x.size}")
    var = float(np.var(x))
    rng_ = float(np.ptp(x))
    if not var > 0 or not rng_ > 0:
        raise ZeroVarianceError("null statistic has zero variance; use empirical p-values")
    lo2 = np.partition(x, 1)[:2]
    gap = float(lo2[1] - lo2[0])
    if not gap > 0:
        gap = 1e-3 * rng_
    shift = float(lo2[0]) - gap
    mean = float(np.mean(x)) - shift
    return ShiftedGammaFit(shift, mean * mean / var, var / mean)


def fit_normal(samples) -> NormalFit:
    x = _values(samples)
    sd = float(np.std(x))
    if not sd > 0:
        raise ZeroVarianceError("null statistic has zero variance; use empirical p-values")
    return NormalFit(float(np.mean(x)), sd)


def p_value(fit: ShiftedGammaFit | NormalFit, observed: float) -> float:
    """Upper-tail probability of ``observed`` under the fitted null."""
    return min(1.0, max(0.0, fit.sf(float(observed))))


def empirical_p_value(samples, observed: float) -> float:
    """``(1 + #{null >= observed}) / (1 + #null)``."""
    x = _values(samples)
    if x.size == 0:
        raise InvalidParameterError("no null samples")
    return (1.0 + float(np.count_nonzero(x >= observed))) / (1.0 + x.size)
