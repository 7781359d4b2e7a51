"""
Weighted least squares and Henderson mixed-model equations

The joint system

    [X'WX        X'WZ       ] [theta]   [X'WY]
    [Z'WX   Z'WZ + G^{-1}   ] [gamma] = [Z'WY]

is solved by absorbing each subject's random-effect block (Z is block
diagonal), so only 2kp x 2kp subject matrices and the fixed-effect block are
ever factorized.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from mxfar.estimator.types import ChannelVariance
from mxfar.exceptions import (
    EmptyNeighborhoodError,
    InsufficientDataError,
    SingularDesignError,
    SingularSystemError,
    SpecError,
)

logger = logging.getLogger(__name__)

RESIDUAL_TOLERANCE = 1e-8
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class HendersonSolution:
    theta: np.ndarray        # fixed effects
    gamma: np.ndarray        # (N, q) random effects, one row per subject
    residual_norm: float
    rhs_norm: float


def _scaled_condition(matrix: np.ndarray) -> float:
    """Condition number after unit-diagonal scaling, so column scale does not count"""
    scale = 1.0 / np.sqrt(np.diag(matrix))
    return float(np.linalg.cond(matrix * scale[:, None] * scale[None, :]))


def weighted_least_squares(regressors: np.ndarray, weights: np.ndarray, response: np.ndarray,
                           ridge: float = 1e-8) -> np.ndarray:
    """
    Solve (X'WX + ridge I) theta = X'WY.

    Raises:
        InsufficientDataError: fewer nonzero weights than parameters
        SingularDesignError: a regressor is identically zero on the weighted
            rows, or the scaled normal matrix is ill-conditioned
    """
    n_params = regressors.shape[1]
    effective = int(np.count_nonzero(weights))
    if effective < n_params:
        raise InsufficientDataError(f"{effective} in-bandwidth observations for {n_params} parameters")

    weighted = regressors * weights[:, None]
    normal = regressors.T @ weighted
    diagonal = np.diag(normal)
    if np.any(diagonal <= 0.0) or np.any(diagonal <= 1e-14 * diagonal.max()):
        zero = int(np.argmin(diagonal))
        raise SingularDesignError(f"Regressor column {zero} vanishes on the weighted rows")

    jittered = normal + ridge * np.eye(n_params)
    condition = _scaled_condition(jittered)
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        raise SingularDesignError(f"Normal matrix is ill-conditioned (scaled condition {condition:.3g})")
    try:
        factor = cho_factor(jittered)
    except LinAlgError as e:
        raise SingularDesignError(f"Normal matrix is not positive definite: {e}") from e
    return cho_solve(factor, weighted.T @ response)


def penalty_matrix(variance: ChannelVariance, penalty_scale: float, max_weight: float,
                   variance_floor: float = 0.0) -> np.ndarray:
    """
    Diagonal of the per-subject G^{-1} block for one channel.

    Entries are lambda * sigma^2 / max_weight, ordered [alpha(kp), beta(kp)]
    like the random-effect columns of Z.

    Args:
        variance: Variance components of the target channel
        penalty_scale: lambda, strictly positive
        max_weight: Largest kernel weight at the grid point
        variance_floor: Lower bound applied to the variances first

    Returns:
        Array of shape (2kp,)

    Raises:
        SpecError: if lambda is not positive
        EmptyNeighborhoodError: if max_weight is not positive
    """
    if not penalty_scale > 0:
        raise SpecError(f"Penalty scale must be positive, got {penalty_scale}")
    if not max_weight > 0:
        raise EmptyNeighborhoodError("No observation has positive kernel weight at this grid point")
    variances = np.concatenate([variance.sigma2_alpha, variance.sigma2_beta])
    return penalty_scale * np.maximum(variances, variance_floor) / max_weight


def _default_slices(blocks: Sequence[np.ndarray]) -> Tuple[slice, ...]:
    slices, start = [], 0
    for block in blocks:
        slices.append(slice(start, start + block.shape[0]))
        start += block.shape[0]
    return tuple(slices)




def _cholesky(matrix: np.ndarray, ridge: float, label: str):
    """
    Factorize a symmetric positive definite matrix, jittering the diagonal
    by ``ridge`` only when the plain factorization fails.

    Returns:
        (factor, jitter) with the jitter actually applied (0.0 or ridge)
    """
    try:
        return cho_factor(matrix), 0.0
    except LinAlgError:
        if not ridge > 0:
            raise
        logger.debug(f"{label} not positive definite; retrying with diagonal jitter {ridge:g}")
        return cho_factor(matrix + ridge * np.eye(matrix.shape[0])), ridge


def solve_henderson_block(X: np.ndarray, Z_blocks: Optional[Sequence[np.ndarray]], weights: np.ndarray,
                          response: np.ndarray, ginv: Optional[np.ndarray] = None, *,
                          row_slices: Optional[Sequence[slice]] = None, ridge: float = 1e-8,
                          subject_ids: Optional[Sequence[str]] = None,
                          group_of: Optional[Sequence[int]] = None) -> HendersonSolution:
    """
    Solve Henderson's mixed-model equations by per-subject block absorption.

    The system is solved as given; ``ridge`` is added to a block's diagonal
    only when that block fails to factorize, and the residual is always
    checked against the unjittered system.

    With ``group_of`` the design is nested: subject n's rows of X hold Z_n
    in column block ``group_of[n]`` and zeros elsewhere. Absorption then uses
    A - A(A + D)^{-1}A = D(A + D)^{-1}A with A = Z_n'W_nZ_n and D = G^{-1},
    which stays accurate when the penalty is tiny next to A.

    Args:
        X: Fixed-effect design (n, P)
        Z_blocks: Per-subject random-effect blocks (n_i, q); None or empty for
            a pure fixed-effect system
        weights: Diagonal of W, shape (n,)
        response: Y_j, shape (n,)
        ginv: Diagonal of G^{-1}, shape (q,) shared by all subjects or (N, q)
        row_slices: Rows of X belonging to each subject (consecutive by default)
        ridge: Fallback jitter for blocks that fail to factorize
        subject_ids: Labels used in error messages
        group_of: Group of every subject for a nested design

    Returns:
        HendersonSolution with theta (P,) and gamma (N, q)

    Raises:
        SingularSystemError: a subject block or the absorbed fixed block
            cannot be factorized, or the residual check fails
        ValueError: ``group_of`` given for a design that is not nested
    """
    weights = np.asarray(weights, dtype=float)
    response = np.asarray(response, dtype=float)
    n_fixed = X.shape[1]
    blocks = list(Z_blocks) if Z_blocks is not None else []
    n_subjects = len(blocks)
    q = blocks[0].shape[1] if blocks else 0
    if row_slices is None:
        row_slices = _default_slices(blocks)
    if subject_ids is None:
        subject_ids = [str(n) for n in range(n_subjects)]
    if n_subjects:
        ginv = np.broadcast_to(np.asarray(ginv, dtype=float), (n_subjects, q))

    WX = X * weights[:, None]
    fixed_normal = X.T @ WX
    fixed_rhs = WX.T @ response
    absorbed = np.zeros((n_fixed, n_fixed)) if group_of is not None else fixed_normal.copy()
    absorbed_rhs = np.zeros(n_fixed) if group_of is not None else fixed_rhs.copy()

    factors, cross, random_rhs = [], [], []
    for n, (rows, Zn) in enumerate(zip(row_slices, blocks)):
        WZn = Zn * weights[rows][:, None]
        An = Zn.T @ WZn
        try:
            factor, jitter = _cholesky(An + np.diag(ginv[n]), ridge, f"Random-effect block of subject {subject_ids[n]}")
        except LinAlgError as e:
            raise SingularSystemError(f"Random-effect block of subject {subject_ids[n]} is singular: {e}",
                                      subject=subject_ids[n]) from e
        Bn = X[rows].T @ WZn                   # X_n' W_n Z_n
        zy = WZn.T @ response[rows]
        if group_of is None:
            absorbed -= Bn @ cho_solve(factor, Bn.T)
            absorbed_rhs -= Bn @ cho_solve(factor, zy)
        else:
            columns = slice(group_of[n] * q, (group_of[n] + 1) * q)
            if not np.array_equal(X[rows, columns], Zn):
                raise ValueError(f"Design is not nested for subject {subject_ids[n]}")
            penalty = ginv[n] + jitter
            absorbed[columns, columns] += penalty[:, None] * cho_solve(factor, An)
            absorbed_rhs[columns] += penalty * cho_solve(factor, zy)
        factors.append(factor)
        cross.append(Bn)
        random_rhs.append(zy)

    absorbed = 0.5 * (absorbed + absorbed.T)
    try:
        factor, _ = _cholesky(absorbed, ridge, "Absorbed fixed-effect block")
        theta = cho_solve(factor, absorbed_rhs)
    except LinAlgError as e:
        raise SingularSystemError(f"Absorbed fixed-effect block is singular: {e}") from e

    gamma = np.zeros((n_subjects, q))
    for n in range(n_subjects):
        gamma[n] = cho_solve(factors[n], random_rhs[n] - cross[n].T @ theta)

    # residual of the unjittered system, assembled blockwise
    fixed_residual = fixed_normal @ theta - fixed_rhs
    random_residuals = []
    for n, (rows, Zn) in enumerate(zip(row_slices, blocks)):
        fixed_residual += cross[n] @ gamma[n]
        WZn = Zn * weights[rows][:, None]
        Cn_gamma = Zn.T @ (WZn @ gamma[n]) + ginv[n] * gamma[n]
        random_residuals.append(cross[n].T @ theta + Cn_gamma - random_rhs[n])
    residual = np.concatenate([fixed_residual] + random_residuals)
    rhs = np.concatenate([fixed_rhs] + random_rhs)
    residual_norm = float(np.linalg.norm(residual))
    rhs_norm = float(np.linalg.norm(rhs))
    if not np.isfinite(residual_norm) or residual_norm > RESIDUAL_TOLERANCE * rhs_norm:
        raise SingularSystemError(
            f"Henderson residual {residual_norm:.3g} exceeds {RESIDUAL_TOLERANCE:g} x |rhs| = {rhs_norm:.3g}")
    return HendersonSolution(theta=theta, gamma=gamma, residual_norm=residual_norm, rhs_norm=rhs_norm)
