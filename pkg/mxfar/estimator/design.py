"""
Local-linear design assembly

A coefficient row for target channel j is laid out as index (l-1)*k + (g-1)
for source channel g at lag l. Each local design row is [x_t, x_t*(U_t - u0)];
the fixed-effect design repeats that block once per group, the random-effect
design is block diagonal with one block per subject.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional, Tuple

import numpy as np

from mxfar.core.kernels import scaled_kernel_weight
from mxfar.core.reference import extract_reference
from mxfar.core.types import Panel, ReferenceSignal
from mxfar.exceptions import EmptyDesignError

if TYPE_CHECKING:
    from mxfar.models import ModelConfig


@dataclass(frozen=True)
class LaggedRows:
    """Usable rows of a panel: lagged regressors, targets and reference values"""
    start: int
    lags: np.ndarray         # (N, n_rows, k*p)
    targets: np.ndarray      # (N, k, n_rows)
    reference: np.ndarray    # (N, n_rows)
    group_of: np.ndarray
    n_groups: int

    @property
    def n_subjects(self) -> int:
        return self.lags.shape[0]

    @property
    def n_rows(self) -> int:
        return self.lags.shape[1]

    @property
    def n_regressors(self) -> int:
        return self.lags.shape[2]

    def subject(self, n: int) -> "LaggedRows":
        return LaggedRows(start=self.start, lags=self.lags[n:n + 1], targets=self.targets[n:n + 1],
                          reference=self.reference[n:n + 1], group_of=np.zeros(1, dtype=int), n_groups=1)


def lag_matrix(values: np.ndarray, p: int, start: int, stop: Optional[int] = None) -> np.ndarray:
    """
    Lagged regressors X_t = (Y_{t-1}', ..., Y_{t-p}')' for t in [start, stop).

    Args:
        values: Array of shape (..., k, T)
        p: Lag order
        start: First time index, at least p
        stop: One past the last time index (defaults to T)

    Returns:
        Array of shape (..., stop - start, k*p)
    """
    n_time = values.shape[-1]
    stop = n_time if stop is None else stop
    blocks = [np.swapaxes(values[..., start - lag:stop - lag], -1, -2) for lag in range(1, p + 1)]
    return np.concatenate(blocks, axis=-1)


def lagged_rows(panel: Panel, config: ModelConfig, reference: Optional[ReferenceSignal] = None,
                start: Optional[int] = None) -> LaggedRows:
    """
    Precompute the u0-independent parts of every local design.

    Raises:
        EmptyDesignError: if no time point survives the burn-in
    """
    start = config.burn_in if start is None else start
    if panel.n_time - start < 1:
        raise EmptyDesignError(f"Series of length {panel.n_time} has no usable rows after burn-in {start}")
    if reference is None:
        reference = extract_reference(panel, config.reference)
    return LaggedRows(
        start=start,
        lags=lag_matrix(panel.values, config.p, start),
        targets=panel.values[:, :, start:],
        reference=reference.values[:, start:],
        group_of=panel.group_of,
        n_groups=panel.n_groups,
    )


def local_regressors(lags: np.ndarray, reference: np.ndarray, u0: float) -> np.ndarray:
    """Local-linear rows [x_t, x_t*(U_t - u0)]"""
    return np.concatenate([lags, lags * (reference - u0)[..., None]], axis=-1)


@dataclass(frozen=True)
class LocalDesign:
    """Weighted mixed-model design for one channel at one grid point"""
    X: np.ndarray                   # (n, G*2kp) fixed effects, one column block per group
    Z_blocks: Tuple[np.ndarray, ...]  # per-subject (n_i, 2kp) random-effect blocks
    weights: np.ndarray             # (n,) diagonal of W
    response: np.ndarray            # (n,)
    row_slices: Tuple[slice, ...]   # rows of each subject
    group_of: np.ndarray

    @property
    def n_local(self) -> int:
        return self.Z_blocks[0].shape[1]

    @property
    def n_groups(self) -> int:
        return self.X.shape[1] // self.n_local

    def Z_dense(self) -> np.ndarray:
        """Materialized block-diagonal Z (for small problems and checks)"""
        q = self.n_local
        Z = np.zeros((self.X.shape[0], q * len(self.Z_blocks)))
        for n, (rows, block) in enumerate(zip(self.row_slices, self.Z_blocks)):
            Z[rows, n * q:(n + 1) * q] = block
        return Z

    def effective_sample(self) -> np.ndarray:
        """Nonzero weights per group"""
        counts = np.zeros(self.n_groups, dtype=int)
        for rows, group in zip(self.row_slices, self.group_of):
            counts[group] += int(np.count_nonzero(self.weights[rows]))
        return counts


def build_local_design(panel: Panel, config: ModelConfig, channel: int, u0: float,
                       rows: Optional[LaggedRows] = None) -> LocalDesign:
    """
    Assemble X, Z, W and Y_j for the Henderson system at u0.

    Args:
        panel: Observed panel
        config: Model configuration
        channel: 0-based target channel j
        u0: Grid point
        rows: Precomputed lagged rows (built from the panel when omitted)

    Returns:
        LocalDesign with group-blocked fixed effects and per-subject random blocks
    """
    if rows is None:
        rows = lagged_rows(panel, config)
    n_subjects, n_rows, _ = rows.lags.shape
    local = local_regressors(rows.lags, rows.reference, u0)     # (N, n_rows, 2kp)
    q = local.shape[-1]

    X = np.zeros((n_subjects * n_rows, rows.n_groups * q))
    for n in range(n_subjects):
        group = rows.group_of[n]
        X[n * n_rows:(n + 1) * n_rows, group * q:(group + 1) * q] = local[n]

    weights = scaled_kernel_weight(config.kernel, rows.reference.reshape(-1), u0, config.bandwidth)
    return LocalDesign(
        X=X,
        Z_blocks=tuple(local[n] for n in range(n_subjects)),
        weights=np.asarray(weights, dtype=float),
        response=rows.targets[:, channel, :].reshape(-1).copy(),
        row_slices=tuple(slice(n * n_rows, (n + 1) * n_rows) for n in range(n_subjects)),
        group_of=np.asarray(rows.group_of),
    )
