"""
Functional partial directed coherence

For coefficient matrices A_l = f(u0) at lag l,

    bar_f(omega) = I - sum_l A_l exp(-i 2 pi omega l)

and fPDC normalizes every source column g of bar_f to unit Euclidean norm,
so |fPDC[j, g]| lies in [0, 1] and the squared moduli of a column sum to 1.
"""
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import pandas as pd

from mxfar.estimator.types import CoefficientGrid
from mxfar.exceptions import SpecError

DEFAULT_OMEGA_POINTS = 64

ArrayLike = Union[float, np.ndarray]


def omega_grid(n_points: int = DEFAULT_OMEGA_POINTS) -> np.ndarray:
    """``n_points`` equispaced frequencies strictly inside (0, 0.5), cycles per sample"""
    if n_points < 1:
        raise SpecError(f"Frequency grid needs at least one point, got {n_points}")
    return np.arange(1, n_points + 1) / (2.0 * (n_points + 1))


def check_omegas(omegas: np.ndarray) -> np.ndarray:
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    if np.any(omegas <= 0) or np.any(omegas >= 0.5):
        raise SpecError("Surface frequencies must lie strictly inside (0, 0.5)")
    return omegas


def lag_matrices(coefficients: np.ndarray, n_channels: Optional[int] = None) -> np.ndarray:
    """
    Split coefficient rows (..., k, k*p) into lag matrices (..., p, k, k).

    Column (l-1)*k + g of row j becomes A_l[j, g].
    """
    coefficients = np.asarray(coefficients)
    k = coefficients.shape[-2] if n_channels is None else n_channels
    p = coefficients.shape[-1] // k
    split = coefficients.reshape(coefficients.shape[:-1] + (p, k))       # (..., k, p, k)
    return np.moveaxis(split, -2, -3)                                     # (..., p, k, k)


def bar_f(coefficients: np.ndarray, omega: ArrayLike) -> np.ndarray:
    """
    I - sum_l A_l e^{-i 2 pi omega l}.

    Args:
        coefficients: (..., k, k*p) coefficient rows at one grid point
        omega: Scalar or array of frequencies (any finite value)

    Returns:
        Complex array (..., k, k) for scalar omega, (..., W, k, k) otherwise
    """
    scalar = np.ndim(omega) == 0
    omegas = np.atleast_1d(np.asarray(omega, dtype=float))
    matrices = lag_matrices(coefficients)                                 # (..., p, k, k)
    p, k = matrices.shape[-3], matrices.shape[-1]
    phases = np.exp(-2j * np.pi * np.outer(omegas, np.arange(1, p + 1)))  # (W, p)
    transfer = np.einsum("wl,...ljg->...wjg", phases, matrices)
    result = np.eye(k) - transfer
    return result[..., 0, :, :] if scalar else result


def normalize_columns(matrix: np.ndarray) -> np.ndarray:
    """Scale every source column g to unit Euclidean norm over targets j"""
    norms = np.sqrt(np.sum(np.abs(matrix) ** 2, axis=-2, keepdims=True))
    return matrix / norms


def fpdc(coefficients: np.ndarray, omega: ArrayLike) -> np.ndarray:
    """Column-normalized bar_f; same shapes as ``bar_f``"""
    return normalize_columns(bar_f(coefficients, omega))


def fpdc_modulus(coefficients: np.ndarray, omegas: np.ndarray) -> np.ndarray:
    """|fPDC| for stacked coefficient rows (..., k, kp) over omegas, shape (..., W, k, k)"""
    return np.abs(fpdc(coefficients, np.atleast_1d(omegas)))


@dataclass(frozen=True)
class FpdcSurface:
    """
    fPDC over (target j, source g, omega, u0).

    ``values`` is complex; gap grid points hold NaN.
    """
    omegas: np.ndarray
    u0: np.ndarray
    values: np.ndarray    # (k, k, W, M)
    scope: str

    @property
    def modulus(self) -> np.ndarray:
        return np.abs(self.values)

    def column_sums(self) -> np.ndarray:
        """sum_j |fPDC[j, g]|^2, shape (k, W, M)"""
        return np.sum(self.modulus ** 2, axis=0)

    def to_frame(self) -> pd.DataFrame:
        """Long table ``scope,target,source,omega,u0,real,imag,modulus`` (1-based channels)"""
        k, _, n_omega, n_points = self.values.shape
        target, source, w, m = np.meshgrid(np.arange(k), np.arange(k), np.arange(n_omega), np.arange(n_points),
                                           indexing="ij")
        values = self.values.reshape(-1)
        return pd.DataFrame({
            "scope": self.scope,
            "target": target.reshape(-1) + 1,
            "source": source.reshape(-1) + 1,
            "omega": self.omegas[w.reshape(-1)],
            "u0": self.u0[m.reshape(-1)],
            "real": values.real,
            "imag": values.imag,
            "modulus": np.abs(values),
        })


def _surface(coefficients: np.ndarray, omegas: np.ndarray, u0: np.ndarray, scope: str) -> FpdcSurface:
    """coefficients (M, k, kp) -> surface (k, k, W, M)"""
    omegas = check_omegas(omegas)
    values = fpdc(coefficients, omegas)                     # (M, W, k, k)
    return FpdcSurface(omegas=omegas, u0=np.asarray(u0), values=np.transpose(values, (2, 3, 1, 0)), scope=scope)


def mean_fpdc(grid: CoefficientGrid, group: int, omegas: Optional[np.ndarray] = None) -> FpdcSurface:
    """
    fPDC of the group-mean coefficients alpha at every grid point.

    This is not the average of subject fPDCs.
    """
    if not 0 <= group < grid.n_groups:
        raise SpecError(f"Group {group} outside 0..{grid.n_groups - 1}")
    omegas = omega_grid() if omegas is None else omegas
    return _surface(grid.alpha()[:, group], omegas, grid.points, scope=f"group {group}")


def subject_fpdc(grid: CoefficientGrid, subject: int, omegas: Optional[np.ndarray] = None) -> FpdcSurface:
    """fPDC of one subject's coefficients alpha[group(n)] + a^(n)"""
    if not 0 <= subject < grid.n_subjects:
        raise SpecError(f"Subject index {subject} outside 0..{grid.n_subjects - 1}")
    omegas = omega_grid() if omegas is None else omegas
    coefficients = grid.subject_coefficients()[subject]     # (M, k, kp)
    return _surface(coefficients, omegas, grid.points, scope=f"subject {grid.subject_ids[subject]}")
