"""Panel generator interface - abstract base for every simulation design"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from mxfar.core.types import Panel
from mxfar.exceptions import GenerationError
from mxfar.models import GeneratorSpec
from mxfar.parallel import ordered_map

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimulationResult:
    """Generated panel with the subject effects needed to rebuild the true curves"""
    panel: Panel
    effects: Tuple[np.ndarray, ...]
    generator: "PanelGenerator"

    def true_curves(self, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        True coefficients on reference values ``u``.

        Returns:
            (group means (G, M, k, kp), subject curves (N, M, k, kp))
        """
        generator = self.generator
        groups = range(self.panel.n_groups)
        means = np.stack([generator.mean_curve(u, group) for group in groups])
        subjects = np.stack([generator.subject_curve(u, int(group), effects)
                             for group, effects in zip(self.panel.group_of, self.effects)])
        return means, subjects


class PanelGenerator(ABC):
    """
    Recursive MX-FAR generator.

    Subject n uses its own stream ``default_rng([seed, n])``: innovations for
    burn-in plus retained samples are drawn first, then the random effects.
    Recursions start from zeros and the first ``burn_in`` samples are dropped.
    """

    # draw fresh random effects when a subject leaves the bound
    redraw_unbounded = False

    def __init__(self, spec: GeneratorSpec):
        self.spec = spec
        self.validate()

    def validate(self) -> None:
        """Raise SpecError/StabilityError for unusable specifications"""

    @property
    def n_channels(self) -> int:
        return self.spec.n_channels

    @property
    def n_regressors(self) -> int:
        return self.spec.n_channels * self.spec.p

    @property
    def start(self) -> int:
        return max(self.spec.p, self.spec.reference_lag)

    @property
    @abstractmethod
    def effect_shape(self) -> Tuple[int, ...]:
        """Shape of one subject's random-effect vector"""
        pass

    @abstractmethod
    def coefficients(self, u: float, group: int, effects: np.ndarray) -> np.ndarray:
        """Subject coefficient rows (k, kp) at reference value u"""
        pass

    def draw_effects(self, rng: np.random.Generator) -> np.ndarray:
        return rng.normal(0.0, self.spec.resolved_random_effect_sd, size=self.effect_shape)

    def mean_coefficients(self, u: float, group: int) -> np.ndarray:
        return self.coefficients(u, group, np.zeros(self.effect_shape))

    def mean_curve(self, u: np.ndarray, group: int) -> np.ndarray:
        return np.stack([self.mean_coefficients(float(value), group) for value in np.atleast_1d(u)])

    def subject_curve(self, u: np.ndarray, group: int, effects: np.ndarray) -> np.ndarray:
        return np.stack([self.coefficients(float(value), group, effects) for value in np.atleast_1d(u)])

    def group_labels(self) -> np.ndarray:
        sizes = self.spec.resolved_group_sizes
        return np.repeat(np.arange(len(sizes)), sizes)

    def _recurse(self, innovations: np.ndarray, group: int, effects: np.ndarray) -> Optional[np.ndarray]:
        """Full-length series (k, burn_in + T), or None once |Y| leaves the bound"""
        spec = self.spec
        values = np.zeros(innovations.shape)
        reference = spec.reference_channel - 1
        for t in range(self.start, values.shape[1]):
            lags = values[:, t - spec.p:t][:, ::-1].T.reshape(-1)          # [Y_{t-1}, ..., Y_{t-p}]
            u = values[reference, t - spec.reference_lag]
            values[:, t] = self.coefficients(u, group, effects) @ lags + innovations[:, t]
            if not np.all(np.isfinite(values[:, t])) or np.max(np.abs(values[:, t])) > spec.bound:
                return None
        return values

    def generate_subject(self, n: int, group: int) -> Tuple[np.ndarray, np.ndarray]:
        """
        Retained series (k, T) and random effects of subject n.

        Raises:
            GenerationError: if the series breaks the boundedness guard
        """
        spec = self.spec
        rng = np.random.default_rng([spec.seed, n])
        innovations = rng.normal(0.0, spec.noise_sd, size=(spec.n_channels, spec.burn_in + spec.n_time))
        attempts = 1 + (spec.max_redraws if self.redraw_unbounded else 0)
        for attempt in range(attempts):
            effects = self.draw_effects(rng)
            values = self._recurse(innovations, group, effects)
            if values is not None:
                if attempt:
                    logger.info(f"Subject {n + 1}: bounded after {attempt} random-effect redraw(s)")
                return values[:, spec.burn_in:], effects
        raise GenerationError(f"Subject {n + 1} exceeded |Y| <= {spec.bound:g} after {attempts} attempt(s)")

    def generate(self, threads: Optional[int] = 1) -> SimulationResult:
        """Generate every subject; results do not depend on ``threads``"""
        groups = self.group_labels()
        outcomes: List[Tuple[np.ndarray, np.ndarray]] = ordered_map(
            lambda n: self.generate_subject(n, int(groups[n])), range(groups.shape[0]), threads)
        panel = Panel(values=np.stack([values for values, _ in outcomes]), group_of=groups,
                      subject_ids=tuple(str(n + 1) for n in range(groups.shape[0])))
        logger.info(f"Generated {self.spec.kind.value} panel: N={panel.n_subjects}, k={panel.n_channels}, "
                    f"T={panel.n_time}, G={panel.n_groups}")
        return SimulationResult(panel=panel, effects=tuple(effects for _, effects in outcomes), generator=self)
