"""
Fitted-model containers: local fits, variance components and coefficient grids
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, List, Optional, Sequence, Tuple

import numpy as np

from mxfar.core.types import ReferenceGrid

if TYPE_CHECKING:
    from mxfar.models import ModelConfig


@dataclass(frozen=True)
class ChannelVariance:
    """Variance components of one target channel, one entry per regressor g:l"""
    sigma2_alpha: np.ndarray  # (kp,)
    sigma2_beta: np.ndarray   # (kp,)


@dataclass(frozen=True)
class VarianceComponents:
    """sigma^2_alpha and sigma^2_beta indexed (channel j, regressor g:l)"""
    sigma2_alpha: np.ndarray  # (k, kp)
    sigma2_beta: np.ndarray   # (k, kp)

    def __post_init__(self):
        for name in ("sigma2_alpha", "sigma2_beta"):
            values = np.asarray(getattr(self, name), dtype=float)
            if np.any(values < 0):
                raise ValueError(f"{name} entries must be nonnegative")
            object.__setattr__(self, name, values)

    @classmethod
    def from_channels(cls, channels: Sequence[ChannelVariance]) -> "VarianceComponents":
        return cls(sigma2_alpha=np.stack([c.sigma2_alpha for c in channels]),
                   sigma2_beta=np.stack([c.sigma2_beta for c in channels]))

    @classmethod
    def floor(cls, n_channels: int, n_regressors: int, value: float) -> "VarianceComponents":
        full = np.full((n_channels, n_regressors), value)
        return cls(sigma2_alpha=full, sigma2_beta=full.copy())

    def channel(self, j: int) -> ChannelVariance:
        return ChannelVariance(sigma2_alpha=self.sigma2_alpha[j], sigma2_beta=self.sigma2_beta[j])


@dataclass(frozen=True)
class ChannelFit:
    """Henderson solution for one target channel at one grid point"""
    alpha: np.ndarray     # (G, kp)
    beta: np.ndarray      # (G, kp)
    a: np.ndarray         # (N, kp)
    b: np.ndarray         # (N, kp)
    sigma2_eps: float


@dataclass(frozen=True)
class LocalFit:
    """
    All channels at one grid point u0.

    Subject coefficients are reconstructed as alpha[group(n)] + a[n].
    """
    u0: float
    alpha: np.ndarray       # (G, k, kp)
    beta: np.ndarray        # (G, k, kp)
    a: np.ndarray           # (N, k, kp)
    b: np.ndarray           # (N, k, kp)
    sigma2_eps: np.ndarray  # (k,)

    @classmethod
    def from_channels(cls, u0: float, channels: Sequence[ChannelFit]) -> "LocalFit":
        return cls(
            u0=float(u0),
            alpha=np.stack([c.alpha for c in channels], axis=1),
            beta=np.stack([c.beta for c in channels], axis=1),
            a=np.stack([c.a for c in channels], axis=1),
            b=np.stack([c.b for c in channels], axis=1),
            sigma2_eps=np.array([c.sigma2_eps for c in channels]),
        )

    def subject_coefficients(self, group_of: np.ndarray) -> np.ndarray:
        """f^(n)(u0) for every subject, shape (N, k, kp)"""
        return self.alpha[np.asarray(group_of)] + self.a


@dataclass(frozen=True)
class CoefficientGrid:
    """M local fits spanning the reference support; ``None`` marks a gap"""
    config: ModelConfig
    grid: ReferenceGrid
    fits: Tuple[Optional[LocalFit], ...]
    variance_components: VarianceComponents
    group_of: np.ndarray
    subject_ids: Tuple[str, ...]
    n_channels: int
    gap_reasons: Tuple[Tuple[int, str], ...] = field(default=())

    def __post_init__(self):
        if len(self.fits) != self.grid.size:
            raise ValueError(f"Expected {self.grid.size} local fits, got {len(self.fits)}")
        object.__setattr__(self, "fits", tuple(self.fits))
        object.__setattr__(self, "group_of", np.asarray(self.group_of, dtype=int))

    @property
    def points(self) -> np.ndarray:
        return self.grid.points

    @property
    def size(self) -> int:
        return self.grid.size

    @property
    def n_subjects(self) -> int:
        return self.group_of.shape[0]

    @property
    def n_groups(self) -> int:
        return int(self.group_of.max()) + 1

    @property
    def n_regressors(self) -> int:
        return self.n_channels * self.config.p

    @property
    def gaps(self) -> List[int]:
        return [m for m, fit in enumerate(self.fits) if fit is None]

    def _stack(self, attribute: str, shape: Tuple[int, ...]) -> np.ndarray:
        out = np.full((self.size,) + shape, np.nan)
        for m, fit in enumerate(self.fits):
            if fit is not None:
                out[m] = getattr(fit, attribute)
        return out

    def alpha(self) -> np.ndarray:
        """Group-mean coefficients, shape (M, G, k, kp), NaN at gaps"""
        return self._stack("alpha", (self.n_groups, self.n_channels, self.n_regressors))

    def beta(self) -> np.ndarray:
        return self._stack("beta", (self.n_groups, self.n_channels, self.n_regressors))

    def random_intercepts(self) -> np.ndarray:
        """Subject random intercepts, shape (M, N, k, kp), NaN at gaps"""
        return self._stack("a", (self.n_subjects, self.n_channels, self.n_regressors))

    def sigma2_eps(self) -> np.ndarray:
        """Per grid point and channel, shape (M, k)"""
        return self._stack("sigma2_eps", (self.n_channels,))

    def subject_coefficients(self, fill_gaps: bool = False) -> np.ndarray:
        """
        Subject coefficient table f^(n)(u0_m), shape (N, M, k, kp).

        Args:
            fill_gaps: Replace gap segments with the nearest fitted segment
        """
        table = self.alpha()[:, self.group_of] + self.random_intercepts()   # (M, N, k, kp)
        if fill_gaps:
            table = table[self.nearest_fitted()]
        return np.swapaxes(table, 0, 1)

    def nearest_fitted(self) -> np.ndarray:
        """Index of the nearest non-gap segment for every segment"""
        fitted = np.array([m for m, fit in enumerate(self.fits) if fit is not None])
        if fitted.size == 0:
            raise ValueError("Coefficient grid has no fitted segments")
        positions = np.arange(self.size)
        return fitted[np.argmin(np.abs(positions[:, None] - fitted[None, :]), axis=1)]
