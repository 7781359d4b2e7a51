"""
Constant-coefficient mixed-effects VAR, the null model of the nonlinearity test
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from mxfar.core.types import Panel
from mxfar.estimator.design import lag_matrix
from mxfar.estimator.henderson import solve_henderson_block, weighted_least_squares
from mxfar.exceptions import InsufficientDataError, SingularDesignError, SpecError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NullModel:
    """eta^(n) = group mean + subject effect, constant in the reference signal"""
    p: int
    start: int
    group_means: np.ndarray   # (G, k, kp)
    effects: np.ndarray       # (N, k, kp)
    group_of: np.ndarray
    sigma2_eta: np.ndarray    # (k, kp)

    @property
    def subject_coefficients(self) -> np.ndarray:
        """eta^(n), shape (N, k, kp)"""
        return self.group_means[self.group_of] + self.effects

    def predict(self, panel: Panel) -> np.ndarray:
        """One-step predictions over t >= start, shape (N, k, T - start)"""
        lags = lag_matrix(panel.values, self.p, self.start)                  # (N, n, kp)
        return np.einsum("njr,ntr->njt", self.subject_coefficients, lags)

    def residuals(self, panel: Panel) -> np.ndarray:
        return panel.values[:, :, self.start:] - self.predict(panel)

    def rss(self, panel: Panel) -> float:
        return float(np.sum(self.residuals(panel) ** 2))


def _subject_var_variance(lags: np.ndarray, targets: np.ndarray, group_of: np.ndarray,
                          ridge: float, floor: float) -> np.ndarray:
    """Pooled within-group variance of per-subject least-squares VAR coefficients, shape (k, kp)"""
    n_subjects, n_rows, kp = lags.shape
    estimates = np.full((n_subjects, targets.shape[1], kp), np.nan)
    for n in range(n_subjects):
        try:
            estimates[n] = weighted_least_squares(lags[n], np.ones(n_rows), targets[n].T, ridge=ridge).T
        except (InsufficientDataError, SingularDesignError) as e:
            logger.debug(f"Subject {n}: no least-squares VAR fit ({e})")
    ok = np.all(np.isfinite(estimates), axis=(1, 2))
    squares = np.zeros(estimates.shape[1:])
    dof = 0
    for group in np.unique(group_of):
        members = estimates[ok & (group_of == group)]
        if members.shape[0] >= 2:
            squares += np.sum((members - members.mean(axis=0)) ** 2, axis=0)
            dof += members.shape[0] - 1
    if dof < 1:
        return np.full(estimates.shape[1:], floor)
    return np.maximum(squares / dof, floor)


def fit_null_mevar(panel: Panel, p: int, *, start: Optional[int] = None, penalty_scale: float = 1.0,
                   variance_floor: float = 1e-8, ridge: float = 1e-8,
                   sigma2_eta: Optional[np.ndarray] = None) -> NullModel:
    """
    Fit Y_t = eta^(n) X_t + e_t with Henderson's equations.

    The design is intercept-only (no slope columns), W = I and G^{-1} holds
    lambda * sigma^2_eta per regressor.

    Args:
        panel: Observed panel
        p: Lag order
        start: First fitted 0-based time index (defaults to p)
        penalty_scale: lambda
        variance_floor: Lower bound on sigma^2_eta
        ridge: Fallback jitter for blocks that fail to factorize
        sigma2_eta: Fixed variance components (k, kp); estimated from
            per-subject least squares when omitted

    Returns:
        NullModel

    Raises:
        SpecError: if p >= T or start is below p
    """
    if p >= panel.n_time:
        raise SpecError(f"Lag order {p} needs more than {panel.n_time} time points")
    start = p if start is None else start
    if start < p or start >= panel.n_time:
        raise SpecError(f"Null model start {start} outside {p}..{panel.n_time - 1}")

    lags = lag_matrix(panel.values, p, start)           # (N, n, kp)
    targets = panel.values[:, :, start:]                # (N, k, n)
    n_subjects, n_rows, kp = lags.shape
    n_groups = panel.n_groups
    if sigma2_eta is None:
        sigma2_eta = _subject_var_variance(lags, targets, panel.group_of, ridge, variance_floor)
    sigma2_eta = np.maximum(np.asarray(sigma2_eta, dtype=float), variance_floor)

    X = np.zeros((n_subjects * n_rows, n_groups * kp))
    for n in range(n_subjects):
        group = panel.group_of[n]
        X[n * n_rows:(n + 1) * n_rows, group * kp:(group + 1) * kp] = lags[n]
    weights = np.ones(n_subjects * n_rows)
    row_slices = [slice(n * n_rows, (n + 1) * n_rows) for n in range(n_subjects)]

    group_means = np.zeros((n_groups, panel.n_channels, kp))
    effects = np.zeros((n_subjects, panel.n_channels, kp))
    for j in range(panel.n_channels):
        solution = solve_henderson_block(X, list(lags), weights, targets[:, j, :].reshape(-1),
                                         penalty_scale * sigma2_eta[j], row_slices=row_slices, ridge=ridge,
                                         subject_ids=panel.subject_ids, group_of=panel.group_of)
        group_means[:, j, :] = solution.theta.reshape(n_groups, kp)
        effects[:, j, :] = solution.gamma
    return NullModel(p=p, start=start, group_means=group_means, effects=effects,
                     group_of=np.asarray(panel.group_of), sigma2_eta=sigma2_eta)
