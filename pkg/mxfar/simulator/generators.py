"""
Simulation designs

EXPAR: random effects enter the exponent. Sigmoid two-group: random effects
are additive and group 2 uses the negated group-1 mean coefficients. Linear
VAR, TAR and tabulated custom curves take optional additive effects on every
coefficient.
"""
import logging
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from mxfar.exceptions import ExtrapolationError, SpecError, StabilityError
from mxfar.models import GeneratorKind, GeneratorSpec
from mxfar.simulator.interface import PanelGenerator

logger = logging.getLogger(__name__)


def _require_bivariate_first_order(spec: GeneratorSpec) -> None:
    if spec.n_channels != 2 or spec.p != 1:
        raise SpecError(f"{spec.kind.value} design is bivariate of order 1, got k={spec.n_channels}, p={spec.p}")


def lag_blocks(coefficients: Sequence[Sequence[Sequence[float]]], n_channels: int) -> np.ndarray:
    """[lag][target][source] nested lists -> coefficient rows (k, kp)"""
    matrices = np.asarray(coefficients, dtype=float)
    if matrices.ndim != 3 or matrices.shape[1:] != (n_channels, n_channels):
        raise SpecError(f"Coefficient matrices must have shape (p, {n_channels}, {n_channels}), got {matrices.shape}")
    return np.concatenate(list(matrices), axis=1)


def spectral_radius(rows: np.ndarray) -> float:
    """Largest modulus among the eigenvalues of the VAR companion matrix"""
    k, kp = rows.shape
    companion = np.zeros((kp, kp))
    companion[:k] = rows
    companion[k:, :kp - k] = np.eye(kp - k)
    return float(np.max(np.abs(np.linalg.eigvals(companion))))


def check_stable(rows: np.ndarray, label: str = "VAR") -> None:
    radius = spectral_radius(rows)
    if radius >= 1.0:
        raise StabilityError(f"{label} coefficients have spectral radius {radius:.4g} >= 1")


class ExparGenerator(PanelGenerator):
    """f_{1,1} = -0.3, f_{1,2} = 0.6 exp(-(0.30 + l1) u^2); f_{2,1} = -0.2, f_{2,2} = 0.6 exp(-(0.15 + l2) u^2)"""

    DECAY = (0.30, 0.15)
    LEVEL = 0.6
    CONSTANT = (-0.3, -0.2)

    def validate(self) -> None:
        _require_bivariate_first_order(self.spec)

    @property
    def effect_shape(self) -> Tuple[int, ...]:
        return (2,)

    def coefficients(self, u: float, group: int, effects: np.ndarray) -> np.ndarray:
        rows = np.empty((2, 2))
        for j in range(2):
            rows[j, 0] = self.CONSTANT[j]
            rows[j, 1] = self.LEVEL * np.exp(-(self.DECAY[j] + effects[j]) * u ** 2)
        return rows


class SigmoidTwoGroupGenerator(PanelGenerator):
    """
    Group 1: f_{1,1} = 0.8 s(5u) - 0.3, f_{2,1} = -0.9 s(5u) + 0.5, f_{1,2} = 0.2,
    f_{2,2} = 0.3 with s the logistic function; group 2 negates these means.
    Subject effects are added to the first column.
    """

    redraw_unbounded = True

    def validate(self) -> None:
        _require_bivariate_first_order(self.spec)

    @property
    def effect_shape(self) -> Tuple[int, ...]:
        return (2,)

    @staticmethod
    def group_one_mean(u: float) -> np.ndarray:
        s = expit(5.0 * u)
        return np.array([[0.8 * s - 0.3, 0.2],
                         [-0.9 * s + 0.5, 0.3]])

    def mean_coefficients(self, u: float, group: int) -> np.ndarray:
        mean = self.group_one_mean(u)
        return mean if group == 0 else -mean

    def coefficients(self, u: float, group: int, effects: np.ndarray) -> np.ndarray:
        rows = self.mean_coefficients(u, group).copy()
        rows[:, 0] += effects
        return rows


class _AdditiveEffectsGenerator(PanelGenerator):
    """Generators whose subject effects shift every coefficient"""

    @property
    def effect_shape(self) -> Tuple[int, ...]:
        return (self.n_channels, self.n_regressors)


class LinearVarGenerator(_AdditiveEffectsGenerator):
    """Constant coefficients; 0.5 I at lag 1 unless given"""

    def validate(self) -> None:
        spec = self.spec
        if spec.coefficients is None:
            rows = np.zeros((spec.n_channels, spec.n_channels * spec.p))
            rows[:, :spec.n_channels] = 0.5 * np.eye(spec.n_channels)
        else:
            rows = lag_blocks(spec.coefficients, spec.n_channels)
            if rows.shape[1] != spec.n_channels * spec.p:
                raise SpecError(f"Expected {spec.p} lag matrices, got {rows.shape[1] // spec.n_channels}")
        check_stable(rows)
        self.rows = rows

    def coefficients(self, u: float, group: int, effects: np.ndarray) -> np.ndarray:
        return self.rows + effects


class TarGenerator(_AdditiveEffectsGenerator):
    """phi_low for u <= threshold, phi_high above it"""

    def validate(self) -> None:
        spec = self.spec
        if spec.coefficients is None or spec.coefficients_high is None:
            raise SpecError("TAR design needs coefficients for both regimes")
        self.low = lag_blocks(spec.coefficients, spec.n_channels)
        self.high = lag_blocks(spec.coefficients_high, spec.n_channels)
        if self.low.shape != (spec.n_channels, spec.n_channels * spec.p) or self.high.shape != self.low.shape:
            raise SpecError(f"TAR regimes must each hold {spec.p} lag matrices")
        check_stable(self.low, "TAR low regime")
        check_stable(self.high, "TAR high regime")

    def coefficients(self, u: float, group: int, effects: np.ndarray) -> np.ndarray:
        return (self.low if u <= self.spec.threshold else self.high) + effects


class CustomCurveGenerator(_AdditiveEffectsGenerator):
    """
    Coefficients interpolated linearly from tabulated curves.

    Args:
        spec: Generator specification
        knots: Increasing reference values (K,)
        values: Coefficient rows at the knots (K, k, kp)
    """

    def __init__(self, spec: GeneratorSpec, knots: Optional[np.ndarray] = None, values: Optional[np.ndarray] = None):
        self.knots = None if knots is None else np.asarray(knots, dtype=float)
        self.values = None if values is None else np.asarray(values, dtype=float)
        super().__init__(spec)

    def validate(self) -> None:
        spec = self.spec
        if self.knots is None or self.values is None or self.knots.size == 0:
            raise SpecError("Custom design needs a non-empty coefficient table")
        expected = (self.knots.size, spec.n_channels, spec.n_channels * spec.p)
        if self.values.shape != expected:
            raise SpecError(f"Custom table must have shape {expected}, got {self.values.shape}")
        if self.knots.size > 1 and np.any(np.diff(self.knots) <= 0):
            raise SpecError("Custom table knots must be strictly increasing")
        self._flat = self.values.reshape(self.knots.size, -1)

    def coefficients(self, u: float, group: int, effects: np.ndarray) -> np.ndarray:
        if not self.knots[0] <= u <= self.knots[-1]:
            raise ExtrapolationError(f"Reference value {u:.4g} outside the tabulated range "
                                     f"[{self.knots[0]:.4g}, {self.knots[-1]:.4g}]")
        flat = np.array([np.interp(u, self.knots, column) for column in self._flat.T])
        return flat.reshape(self.values.shape[1:]) + effects


GENERATORS = {
    GeneratorKind.EXPAR: ExparGenerator,
    GeneratorKind.SIGMOID_TWO_GROUP: SigmoidTwoGroupGenerator,
    GeneratorKind.LINEAR_VAR: LinearVarGenerator,
    GeneratorKind.TAR: TarGenerator,
    GeneratorKind.CUSTOM: CustomCurveGenerator,
}
