"""
Reproducible panel generators for simulation studies
"""

from .interface import PanelGenerator, SimulationResult
from .generators import (
    CustomCurveGenerator,
    ExparGenerator,
    LinearVarGenerator,
    SigmoidTwoGroupGenerator,
    TarGenerator,
    spectral_radius,
)
from .factory import (
    get_generator,
    simulate,
    simulate_custom,
    simulate_expar,
    simulate_linear_var,
    simulate_sigmoid_groups,
    simulate_tar,
)

__all__ = [
    "PanelGenerator",
    "SimulationResult",
    "CustomCurveGenerator",
    "ExparGenerator",
    "LinearVarGenerator",
    "SigmoidTwoGroupGenerator",
    "TarGenerator",
    "spectral_radius",
    "get_generator",
    "simulate",
    "simulate_custom",
    "simulate_expar",
    "simulate_linear_var",
    "simulate_sigmoid_groups",
    "simulate_tar",
]
