"""
Residual bootstrap: nonlinearity test and pointwise coefficient bands

Every replicate draws from its own generator ``default_rng([seed, b])`` so
results do not depend on the worker count. Bootstrap panels are generated
recursively from the first max(p, d) observed values.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Callable, List, Optional, Sequence

import numpy as np
import pandas as pd

from mxfar.core.types import Panel
from mxfar.estimator.export import regressor_labels
from mxfar.estimator.fit import fit_mxfar, residuals
from mxfar.estimator.types import CoefficientGrid
from mxfar.exceptions import BootstrapError, MxfarError, SpecError
from mxfar.inference.null_model import fit_null_mevar
from mxfar.parallel import ordered_map

if TYPE_CHECKING:
    from mxfar.models import ModelConfig, ReferenceSpec

logger = logging.getLogger(__name__)

POOLING_SUBJECT = "subject"
POOLING_ALL = "pooled"
MAX_DROP_FRACTION = 0.25
CENTERING_TOLERANCE = 1e-12
DIVERGENCE_BOUND = 1e6
MIN_BAND_REPLICATES = 50

CoefficientsAt = Callable[[np.ndarray, int], np.ndarray]


def replicate_rng(seed: int, replicate: int, stream: Sequence[int] = ()) -> np.random.Generator:
    """Generator of replicate b in a named substream of the root seed"""
    return np.random.default_rng([seed, *stream, replicate])


def center_residuals(values: np.ndarray) -> np.ndarray:
    """
    Subtract the per-subject, per-channel mean over time.

    Raises:
        BootstrapError: if a centered pool still has mean above 1e-12
    """
    centered = values - values.mean(axis=2, keepdims=True)
    worst = float(np.max(np.abs(centered.mean(axis=2)))) if centered.size else 0.0
    if worst > CENTERING_TOLERANCE:
        centered = centered - centered.mean(axis=2, keepdims=True)
        worst = float(np.max(np.abs(centered.mean(axis=2))))
        if worst > CENTERING_TOLERANCE:
            raise BootstrapError(f"Centered residual pool has mean {worst:.3g}")
    return centered


def resample_residuals(centered: np.ndarray, rng: np.random.Generator, pooling: str = POOLING_SUBJECT) -> np.ndarray:
    """
    Draw residual vectors with replacement.

    Whole k-vectors are drawn so cross-channel dependence is kept. With
    subject pooling each subject draws from its own pool; otherwise from the
    pool of all subjects.
    """
    n_subjects, _, n_rows = centered.shape
    if pooling == POOLING_SUBJECT:
        times = rng.integers(0, n_rows, size=(n_subjects, n_rows))
        return np.take_along_axis(centered, times[:, None, :], axis=2)
    if pooling == POOLING_ALL:
        subjects = rng.integers(0, n_subjects, size=(n_subjects, n_rows))
        times = rng.integers(0, n_rows, size=(n_subjects, n_rows))
        return np.transpose(centered[subjects, :, times], (0, 2, 1))
    raise SpecError(f"Unknown residual pooling {pooling!r}")


def generate_recursive(panel: Panel, start: int, p: int, coefficients_at: CoefficientsAt,
                       innovations: np.ndarray, bound: float = DIVERGENCE_BOUND) -> Panel:
    """
    Y_t = f(t) X_t + e_t for t >= start, the first ``start`` values copied from ``panel``.

    Args:
        panel: Source of initial conditions, subjects, groups and exogenous input
        start: Number of initial observations kept
        p: Lag order
        coefficients_at: Maps (values so far, t) to coefficients (N, k, kp)
        innovations: (N, k, T - start)

    Raises:
        BootstrapError: if the series leaves the bound
    """
    values = np.zeros(panel.values.shape)
    values[:, :, :start] = panel.values[:, :, :start]
    for t in range(start, panel.n_time):
        lags = np.concatenate([values[:, :, t - lag] for lag in range(1, p + 1)], axis=1)   # (N, kp)
        values[:, :, t] = np.einsum("njr,nr->nj", coefficients_at(values, t), lags) + innovations[:, :, t - start]
    if not np.all(np.isfinite(values)) or np.max(np.abs(values)) > bound:
        raise BootstrapError(f"Bootstrap series left the bound |Y| <= {bound:g}")
    return panel.with_values(values)


def reference_at(values: np.ndarray, exogenous: Optional[np.ndarray], spec: ReferenceSpec, t: int) -> np.ndarray:
    """U_t of every subject from values generated so far"""
    if spec.source == "channel":
        return values[:, spec.channel - 1, t - spec.lag]
    return exogenous[:, t - spec.lag]


def grid_coefficients(grid: CoefficientGrid, exogenous: Optional[np.ndarray],
                      table: Optional[np.ndarray] = None) -> CoefficientsAt:
    """Coefficient lookup through the grid segment of U_t; gaps use the nearest fitted segment"""
    table = grid.subject_coefficients(fill_gaps=True) if table is None else table    # (N, M, k, kp)
    subjects = np.arange(table.shape[0])
    spec = grid.config.reference

    def coefficients_at(values: np.ndarray, t: int) -> np.ndarray:
        segments = grid.grid.segment_of(reference_at(values, exogenous, spec, t))
        return table[subjects, segments]

    return coefficients_at


def constant_coefficients(coefficients: np.ndarray) -> CoefficientsAt:
    return lambda values, t: coefficients


@dataclass
class ReplicateRun:
    results: List[Any]
    dropped: List[int] = field(default_factory=list)

    @property
    def n_effective(self) -> int:
        return len(self.results)


def run_replicates(replicate: Callable[[int, np.random.Generator], Any], n_replicates: int, seed: int,
                   threads: Optional[int] = 1, label: str = "bootstrap", stream: Sequence[int] = ()) -> ReplicateRun:
    """
    Run replicates b = 0..B-1, dropping failures.

    Raises:
        SpecError: if B < 1
        BootstrapError: if more than 25% of the replicates fail
    """
    if n_replicates < 1:
        raise SpecError(f"Replicate count must be at least 1, got {n_replicates}")
    step = max(1, n_replicates // 10)

    def run(b: int):
        try:
            result = replicate(b, replicate_rng(seed, b, stream))
        except MxfarError as e:
            logger.warning(f"{label}: replicate {b} dropped ({e})")
            return None
        if (b + 1) % step == 0:
            logger.info(f"{label}: replicate {b + 1}/{n_replicates} done")
        return result

    outcomes = ordered_map(run, range(n_replicates), threads)
    dropped = [b for b, outcome in enumerate(outcomes) if outcome is None]
    if len(dropped) > MAX_DROP_FRACTION * n_replicates:
        raise BootstrapError(f"{label}: {len(dropped)} of {n_replicates} replicates failed")
    return ReplicateRun(results=[outcome for outcome in outcomes if outcome is not None], dropped=dropped)


def bootstrap_grids(panel: Panel, fitted: CoefficientGrid, n_replicates: int, seed: int, *,
                    collect: Callable[[CoefficientGrid], Any], threads: Optional[int] = 1,
                    pooling: str = POOLING_SUBJECT, coefficient_table: Optional[np.ndarray] = None,
                    label: str = "bands", stream: Sequence[int] = ()) -> ReplicateRun:
    """
    Regenerate panels from a fitted MX-FAR model and refit them on its grid.

    Args:
        panel: Observed panel
        fitted: Fitted coefficient grid supplying residuals and, unless
            ``coefficient_table`` is given, the generating coefficients
        collect: Reduces each refitted grid to what the caller keeps
        coefficient_table: Generating subject coefficients (N, M, k, kp)
    """
    config = fitted.config
    centered = center_residuals(residuals(fitted, panel, fill_gaps=True).values)
    coefficients_at = grid_coefficients(fitted, panel.exogenous, coefficient_table)

    def replicate(b: int, rng: np.random.Generator):
        innovations = resample_residuals(centered, rng, pooling)
        generated = generate_recursive(panel, config.burn_in, config.p, coefficients_at, innovations)
        return collect(fit_mxfar(generated, config, grid=fitted.grid))

    return run_replicates(replicate, n_replicates, seed, threads, label, stream)


# ----------------------------------------------------------------------------
# Nonlinearity test
# ----------------------------------------------------------------------------

def rss_ratio(rss0: float, rss1: float) -> float:
    """L = RSS0 / RSS1 - 1"""
    if rss1 > 0:
        return rss0 / rss1 - 1.0
    return 0.0 if rss0 == 0 else math.inf


@dataclass
class NonlinearityTestResult:
    statistic: float
    rss0: float
    rss1: float
    n_replicates: int
    bootstrap_statistics: np.ndarray
    p_value: float
    dropped: List[int] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"replicate": np.arange(1, self.bootstrap_statistics.shape[0] + 1),
                             "L_boot": self.bootstrap_statistics})


def nonlinearity_test(panel: Panel, config: ModelConfig, n_replicates: int, *, seed: int = 0,
                      threads: Optional[int] = 1, pooling: str = POOLING_SUBJECT) -> NonlinearityTestResult:
    """
    Bootstrap test of a constant-coefficient mixed-effects VAR against MX-FAR.

    MX-FAR residuals are centered within subject and resampled; bootstrap
    panels are generated under the fitted null and both models refitted.

    Args:
        panel: Observed panel
        config: MX-FAR configuration
        n_replicates: B
        seed: Root seed
        threads: Worker count over replicates
        pooling: ``subject`` (within-subject pools) or ``pooled``

    Returns:
        NonlinearityTestResult with p_value = #{L_b >= L} / B_effective
    """
    def null_fit(data: Panel):
        return fit_null_mevar(data, config.p, start=config.burn_in, penalty_scale=config.penalty_scale,
                              variance_floor=config.variance_floor, ridge=config.ridge)

    fitted = fit_mxfar(panel, config, threads=threads)
    alternative = residuals(fitted, panel, fill_gaps=True)
    null = null_fit(panel)
    rss0, rss1 = null.rss(panel), alternative.rss()
    statistic = rss_ratio(rss0, rss1)
    logger.info(f"RSS0={rss0:.6g}, RSS1={rss1:.6g}, L={statistic:.6g}")

    centered = center_residuals(alternative.values)
    coefficients_at = constant_coefficients(null.subject_coefficients)

    def replicate(b: int, rng: np.random.Generator) -> float:
        innovations = resample_residuals(centered, rng, pooling)
        generated = generate_recursive(panel, config.burn_in, config.p, coefficients_at, innovations)
        refit = fit_mxfar(generated, config, grid=fitted.grid)
        return rss_ratio(null_fit(generated).rss(generated), residuals(refit, generated, fill_gaps=True).rss())

    run = run_replicates(replicate, n_replicates, seed, threads, label="nonlinearity test")
    boot = np.array(run.results, dtype=float)
    p_value = float(np.count_nonzero(boot >= statistic)) / boot.shape[0]
    return NonlinearityTestResult(statistic=statistic, rss0=rss0, rss1=rss1, n_replicates=boot.shape[0],
                                  bootstrap_statistics=boot, p_value=p_value, dropped=run.dropped)


# ----------------------------------------------------------------------------
# Coefficient bands
# ----------------------------------------------------------------------------

@dataclass
class CoefficientBand:
    """Pointwise bootstrap interval of group-mean coefficients, arrays (M, G, k, kp)"""
    grid: CoefficientGrid
    estimate: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float
    n_replicates: int
    dropped: List[int] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        """``channel,group,target_lag_channel,lag,u0,alpha,lower,upper``"""
        labels = regressor_labels(self.grid.n_channels, self.grid.config.p)
        points = self.grid.points
        records = []
        for j in range(self.grid.n_channels):
            for group in range(self.grid.n_groups):
                for r, (source, lag) in enumerate(labels):
                    for m, u0 in enumerate(points):
                        if self.grid.fits[m] is None:
                            continue
                        records.append((j + 1, group, source, lag, u0, self.estimate[m, group, j, r],
                                        self.lower[m, group, j, r], self.upper[m, group, j, r]))
        return pd.DataFrame.from_records(
            records, columns=["channel", "group", "target_lag_channel", "lag", "u0", "alpha", "lower", "upper"])


def band_quantiles(samples: np.ndarray, level: float):
    """Empirical (1 - level)/2 and (1 + level)/2 quantiles over the first axis"""
    if not 0 < level < 1:
        raise SpecError(f"Band level must lie in (0, 1), got {level}")
    with np.errstate(all="ignore"):
        lower = np.nanquantile(samples, (1 - level) / 2, axis=0)
        upper = np.nanquantile(samples, (1 + level) / 2, axis=0)
    return lower, upper


def coefficient_bands(panel: Panel, config: ModelConfig, n_replicates: int, level: float = 0.95, *,
                      seed: int = 0, threads: Optional[int] = 1, pooling: str = POOLING_SUBJECT,
                      fitted: Optional[CoefficientGrid] = None) -> CoefficientBand:
    """
    Pointwise residual-bootstrap bands for the group-mean coefficients.

    Args:
        panel: Observed panel
        config: MX-FAR configuration
        n_replicates: B (at least 50 recommended)
        level: Coverage, e.g. 0.95
        fitted: Reuse an existing fit of ``panel``
    """
    if not 0 < level < 1:
        raise SpecError(f"Band level must lie in (0, 1), got {level}")
    if n_replicates < MIN_BAND_REPLICATES:
        logger.warning(f"Only {n_replicates} bootstrap replicates; bands need at least {MIN_BAND_REPLICATES}")
    if fitted is None:
        fitted = fit_mxfar(panel, config, threads=threads)
    run = bootstrap_grids(panel, fitted, n_replicates, seed, collect=lambda grid: grid.alpha(),
                          threads=threads, pooling=pooling)
    lower, upper = band_quantiles(np.stack(run.results), level)
    return CoefficientBand(grid=fitted, estimate=fitted.alpha(), lower=lower, upper=upper, level=level,
                           n_replicates=run.n_effective, dropped=run.dropped)
