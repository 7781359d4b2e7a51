"""
MX-FAR fitting, grid prediction and residuals
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional, Sequence, Tuple

import numpy as np

from mxfar.core.kernels import scaled_kernel_weight
from mxfar.core.reference import build_grid, extract_reference
from mxfar.core.types import Panel, ReferenceGrid
from mxfar.estimator.design import LaggedRows, build_local_design, lag_matrix, lagged_rows, local_regressors
from mxfar.estimator.henderson import penalty_matrix, solve_henderson_block, weighted_least_squares
from mxfar.estimator.types import ChannelFit, ChannelVariance, CoefficientGrid, LocalFit, VarianceComponents
from mxfar.exceptions import (
    DataError,
    FitFailureError,
    GapError,
    InsufficientDataError,
    NumericalError,
    SingularDesignError,
    VarianceUndefinedError,
)
from mxfar.parallel import ordered_map

if TYPE_CHECKING:
    from mxfar.models import ModelConfig

logger = logging.getLogger(__name__)

MAX_GAP_FRACTION = 0.2
SINGLE_SUBJECT_PENALTY = 1e12


# ----------------------------------------------------------------------------
# Single-subject (pooled) local-linear WLS
# ----------------------------------------------------------------------------

def _local_wls(rows: LaggedRows, config: ModelConfig, u0: float, response: np.ndarray) -> np.ndarray:
    regressors = local_regressors(rows.lags, rows.reference, u0).reshape(-1, 2 * rows.n_regressors)
    weights = scaled_kernel_weight(config.kernel, rows.reference.reshape(-1), u0, config.bandwidth)
    return weighted_least_squares(regressors, np.asarray(weights, dtype=float), response, ridge=config.ridge)


def fit_far_local(panel: Panel, config: ModelConfig, channel: int, u0: float,
                  rows: Optional[LaggedRows] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Local-linear FAR estimate at u0 for one target channel.

    Rows of all subjects in ``panel`` are stacked with one common coefficient
    vector; pass a single-subject panel for the per-subject estimator.

    Args:
        panel: Observed panel
        config: Model configuration
        channel: 0-based target channel
        u0: Grid point

    Returns:
        (alpha_hat, beta_hat), each of shape (kp,); alpha_hat is f_hat(u0)

    Raises:
        InsufficientDataError: fewer than 2kp nonzero weights
        SingularDesignError: singular or ill-conditioned normal matrix
    """
    if rows is None:
        rows = lagged_rows(panel, config)
    theta = _local_wls(rows, config, u0, rows.targets[:, channel, :].reshape(-1))
    kp = rows.n_regressors
    return theta[:kp], theta[kp:]


def subject_local_fits(rows: LaggedRows, config: ModelConfig, u0: float) -> np.ndarray:
    """
    Independent per-subject fits at u0 for every channel.

    Returns:
        Array (N, k, 2kp) of [alpha, beta]; NaN for subjects whose fit failed
    """
    n_channels = rows.targets.shape[1]
    out = np.full((rows.n_subjects, n_channels, 2 * rows.n_regressors), np.nan)
    for n in range(rows.n_subjects):
        single = rows.subject(n)
        response = single.targets[0].T             # (n_rows, k)
        try:
            out[n] = _local_wls(single, config, u0, response).T
        except (InsufficientDataError, SingularDesignError) as e:
            logger.debug(f"Subject {n} has no local fit at u0={u0:.4g}: {e}")
    return out


# ----------------------------------------------------------------------------
# Variance components
# ----------------------------------------------------------------------------

def _pooled_within_group_variance(estimates: np.ndarray, group_of: np.ndarray) -> Optional[np.ndarray]:
    """Within-group across-subject sample variance, pooled over groups; None without degrees of freedom"""
    ok = np.all(np.isfinite(estimates), axis=1)
    squares = np.zeros(estimates.shape[1])
    dof = 0
    for group in np.unique(group_of):
        members = estimates[ok & (group_of == group)]
        if members.shape[0] < 2:
            continue
        squares += np.sum((members - members.mean(axis=0)) ** 2, axis=0)
        dof += members.shape[0] - 1
    if dof < 1:
        return None
    return squares / dof


def _channel_variance(pilot: Sequence[np.ndarray], channel: int, group_of: np.ndarray,
                      config: ModelConfig) -> ChannelVariance:
    per_point = []
    for estimates in pilot:
        variance = _pooled_within_group_variance(estimates[:, channel, :], group_of)
        if variance is not None:
            per_point.append(variance)
    if not per_point:
        raise InsufficientDataError(
            f"Channel {channel + 1}: no pilot point has two successful subject fits in one group")
    variance = np.maximum(np.mean(per_point, axis=0), config.variance_floor)
    kp = variance.shape[0] // 2
    return ChannelVariance(sigma2_alpha=variance[:kp], sigma2_beta=variance[kp:])


def _pilot_fits(rows: LaggedRows, config: ModelConfig, pilot_points: Sequence[float],
                threads: Optional[int] = 1) -> list:
    return ordered_map(lambda u0: subject_local_fits(rows, config, u0), list(pilot_points), threads)


def estimate_variance_components(panel: Panel, config: ModelConfig, channel: int, pilot_points: Sequence[float],
                                 rows: Optional[LaggedRows] = None) -> ChannelVariance:
    """
    Pilot estimate of sigma^2_alpha and sigma^2_beta for one channel.

    Every subject is fitted independently at each pilot point; the variance
    of the subject estimates within groups, pooled over groups, is averaged
    over pilot points and floored.

    Raises:
        VarianceUndefinedError: fewer than two subjects
        InsufficientDataError: no pilot point yields a variance
    """
    if panel.n_subjects < 2:
        raise VarianceUndefinedError("Across-subject variance needs at least two subjects")
    if rows is None:
        rows = lagged_rows(panel, config)
    pilot = _pilot_fits(rows, config, pilot_points)
    return _channel_variance(pilot, channel, panel.group_of, config)


def estimate_all_variance_components(panel: Panel, config: ModelConfig, pilot_points: Sequence[float],
                                     rows: Optional[LaggedRows] = None,
                                     threads: Optional[int] = 1) -> VarianceComponents:
    """Variance components of every channel from one set of pilot fits"""
    if panel.n_subjects < 2:
        raise VarianceUndefinedError("Across-subject variance needs at least two subjects")
    if rows is None:
        rows = lagged_rows(panel, config)
    pilot = _pilot_fits(rows, config, pilot_points, threads)
    channels = [_channel_variance(pilot, j, panel.group_of, config) for j in range(panel.n_channels)]
    for j, variance in enumerate(channels):
        logger.info(f"Channel {j + 1}: mean sigma2_alpha={variance.sigma2_alpha.mean():.4g}, "
                    f"mean sigma2_beta={variance.sigma2_beta.mean():.4g}")
    return VarianceComponents.from_channels(channels)


# ----------------------------------------------------------------------------
# Mixed-effects fit
# ----------------------------------------------------------------------------

def fit_mxfar_channel(panel: Panel, config: ModelConfig, channel: int, u0: float, variance: ChannelVariance,
                      rows: Optional[LaggedRows] = None) -> ChannelFit:
    """
    Solve the Henderson system of one channel at one grid point.

    Args:
        panel: Observed panel
        config: Model configuration
        channel: 0-based target channel
        u0: Grid point
        variance: Variance components of the channel
        rows: Precomputed lagged rows

    Returns:
        ChannelFit with per-group alpha/beta, per-subject a/b and the
        kernel-weighted mean squared residual

    Raises:
        InsufficientDataError: a group has fewer than 2kp in-bandwidth rows
    """
    design = build_local_design(panel, config, channel, u0, rows)
    q = design.n_local
    for group, count in enumerate(design.effective_sample()):
        if count < q:
            raise InsufficientDataError(f"Group {group} has {count} in-bandwidth rows at u0={u0:.4g}, needs {q}")

    ginv = penalty_matrix(variance, config.penalty_scale, float(design.weights.max()), config.variance_floor)
    if panel.n_subjects == 1:
        # one subject: random effects pinned at zero, alpha is the FAR estimate
        ginv = np.full_like(ginv, SINGLE_SUBJECT_PENALTY)
    solution = solve_henderson_block(design.X, design.Z_blocks, design.weights, design.response, ginv,
                                     row_slices=design.row_slices, ridge=config.ridge,
                                     subject_ids=panel.subject_ids, group_of=design.group_of)

    fitted = design.X @ solution.theta
    for n, (rows_n, Zn) in enumerate(zip(design.row_slices, design.Z_blocks)):
        fitted[rows_n] += Zn @ solution.gamma[n]
    residual = design.response - fitted
    sigma2 = float(np.sum(design.weights * residual ** 2) / np.sum(design.weights))

    kp = q // 2
    theta = solution.theta.reshape(design.n_groups, q)
    return ChannelFit(alpha=theta[:, :kp], beta=theta[:, kp:],
                      a=solution.gamma[:, :kp], b=solution.gamma[:, kp:], sigma2_eps=sigma2)


def fit_mxfar(panel: Panel, config: ModelConfig, *, grid: Optional[ReferenceGrid] = None,
              variance_components: Optional[VarianceComponents] = None,
              threads: Optional[int] = 1) -> CoefficientGrid:
    """
    Fit the vector MX-FAR model at every grid point and channel.

    Args:
        panel: Observed panel
        config: Model configuration
        grid: Reuse an existing grid instead of building one from the panel
        variance_components: Reuse variance components instead of estimating them
        threads: Worker count for the (channel, grid point) tasks

    Returns:
        CoefficientGrid; grid points where any channel failed are gaps

    Raises:
        FitFailureError: more than 20% of the grid points are gaps
    """
    reference = extract_reference(panel, config.reference)
    if grid is None:
        grid = build_grid(panel, config, reference)
    rows = lagged_rows(panel, config, reference)
    logger.info(f"Fitting MX-FAR: N={panel.n_subjects}, k={panel.n_channels}, p={config.p}, "
                f"reference={config.reference.label()}, h={config.bandwidth:g}, M={grid.size}")

    if variance_components is None:
        if panel.n_subjects == 1:
            logger.info("Single subject: random effects held at zero, variance components at the floor")
            variance_components = VarianceComponents.floor(panel.n_channels, rows.n_regressors, config.variance_floor)
        else:
            pilot_points = grid.points[::config.pilot_stride]
            variance_components = estimate_all_variance_components(panel, config, pilot_points, rows, threads)

    def solve(task):
        m, j = task
        try:
            return fit_mxfar_channel(panel, config, j, float(grid.points[m]), variance_components.channel(j), rows)
        except (DataError, NumericalError) as e:
            return e

    tasks = [(m, j) for m in range(grid.size) for j in range(panel.n_channels)]
    results = ordered_map(solve, tasks, threads)

    fits, reasons = [], []
    for m in range(grid.size):
        channel_results = results[m * panel.n_channels:(m + 1) * panel.n_channels]
        failures = [(j, r) for j, r in enumerate(channel_results) if isinstance(r, Exception)]
        if failures:
            j, error = failures[0]
            reason = f"channel {j + 1}: {error}"
            logger.warning(f"Grid point {m} (u0={grid.points[m]:.4g}) left as a gap; {reason}")
            fits.append(None)
            reasons.append((m, reason))
        else:
            fits.append(LocalFit.from_channels(grid.points[m], channel_results))

    if len(reasons) > MAX_GAP_FRACTION * grid.size:
        raise FitFailureError(f"{len(reasons)} of {grid.size} grid points failed to fit; first: {reasons[0][1]}")

    logger.info(f"Fit complete with {len(reasons)} gap(s)")
    return CoefficientGrid(config=config, grid=grid, fits=tuple(fits), variance_components=variance_components,
                           group_of=panel.group_of, subject_ids=panel.subject_ids, n_channels=panel.n_channels,
                           gap_reasons=tuple(reasons))


def fit_independent(panel: Panel, config: ModelConfig, *, grid: Optional[ReferenceGrid] = None,
                    threads: Optional[int] = 1) -> Tuple[ReferenceGrid, np.ndarray]:
    """
    Separate single-subject FAR fits at every grid point.

    Returns:
        (grid, coefficients) with coefficients of shape (N, M, k, kp); NaN
        where a subject could not be fitted
    """
    reference = extract_reference(panel, config.reference)
    if grid is None:
        grid = build_grid(panel, config, reference)
    rows = lagged_rows(panel, config, reference)
    per_point = ordered_map(lambda u0: subject_local_fits(rows, config, u0), list(grid.points), threads)
    coefficients = np.stack(per_point, axis=1)[..., :rows.n_regressors]
    return grid, coefficients


# ----------------------------------------------------------------------------
# Prediction
# ----------------------------------------------------------------------------

def _check_panel(grid: CoefficientGrid, panel: Panel) -> None:
    if panel.n_subjects != grid.n_subjects or panel.n_channels != grid.n_channels:
        raise ValueError(f"Panel (N={panel.n_subjects}, k={panel.n_channels}) does not match the fitted grid "
                         f"(N={grid.n_subjects}, k={grid.n_channels})")


def predict_one_step(grid: CoefficientGrid, panel: Panel, subject: int, t: int) -> np.ndarray:
    """
    One-step prediction f^(n)(u0*) X_t for a 0-based subject and time index.

    Raises:
        IndexError: t outside [max(p, d), T) or subject out of range
        GapError: the segment containing U_t has no fit
    """
    _check_panel(grid, panel)
    config = grid.config
    if not 0 <= subject < panel.n_subjects:
        raise IndexError(f"Subject index {subject} outside 0..{panel.n_subjects - 1}")
    if not config.burn_in <= t < panel.n_time:
        raise IndexError(f"Time index {t} outside the usable range {config.burn_in}..{panel.n_time - 1}")

    reference = extract_reference(panel, config.reference)
    segment = int(grid.grid.segment_of(reference.values[subject, t]))
    fit = grid.fits[segment]
    if fit is None:
        raise GapError(f"Segment {segment} has no fit (subject {panel.subject_ids[subject]}, time index {t})")
    coefficients = fit.alpha[grid.group_of[subject]] + fit.a[subject]
    lags = lag_matrix(panel.values[subject], config.p, t, t + 1)[0]
    return coefficients @ lags


def predict_panel(grid: CoefficientGrid, panel: Panel, *, fill_gaps: bool = False,
                  start: Optional[int] = None, stop: Optional[int] = None) -> np.ndarray:
    """
    One-step predictions for every subject over time indices [start, stop).

    Returns:
        Array (N, k, stop - start)

    Raises:
        GapError: a required segment is a gap and ``fill_gaps`` is off
    """
    _check_panel(grid, panel)
    config = grid.config
    start = config.burn_in if start is None else start
    stop = panel.n_time if stop is None else stop
    if not config.burn_in <= start <= stop <= panel.n_time:
        raise IndexError(f"Prediction window [{start}, {stop}) outside {config.burn_in}..{panel.n_time}")

    reference = extract_reference(panel, config.reference)
    segments = grid.grid.segment_of(reference.values[:, start:stop])       # (N, n)
    table = grid.subject_coefficients(fill_gaps=fill_gaps)                 # (N, M, k, kp)
    coefficients = table[np.arange(panel.n_subjects)[:, None], segments]   # (N, n, k, kp)
    lags = lag_matrix(panel.values, config.p, start, stop)                 # (N, n, kp)
    predictions = np.einsum("ntjr,ntr->njt", coefficients, lags)

    if not fill_gaps and np.isnan(predictions).any():
        n, _, t = np.argwhere(np.isnan(predictions))[0]
        raise GapError(f"Segment {segments[n, t]} has no fit (subject {panel.subject_ids[n]}, "
                       f"time index {start + t})")
    return predictions


@dataclass(frozen=True)
class Residuals:
    """r_t = Y_t - f^(n)(U_t) X_t over usable times t >= start"""
    values: np.ndarray   # (N, k, T - start)
    start: int

    def centered(self) -> np.ndarray:
        """Per-subject, per-channel centered residuals"""
        return self.values - self.values.mean(axis=2, keepdims=True)

    def rss(self) -> float:
        return float(np.sum(self.values ** 2))


def residuals(grid: CoefficientGrid, panel: Panel, *, fill_gaps: bool = False) -> Residuals:
    """
    Residual panel over usable times.

    Raises:
        GapError: a required segment is a gap and ``fill_gaps`` is off
    """
    start = grid.config.burn_in
    predictions = predict_panel(grid, panel, fill_gaps=fill_gaps, start=start)
    return Residuals(values=panel.values[:, :, start:] - predictions, start=start)
