"""Generator factory - creates the generator for a GeneratorSpec"""
from typing import Optional

import numpy as np

from mxfar.exceptions import SpecError
from mxfar.models import GeneratorKind, GeneratorSpec
from mxfar.simulator.generators import GENERATORS, CustomCurveGenerator
from mxfar.simulator.interface import PanelGenerator, SimulationResult


def get_generator(spec: GeneratorSpec, knots: Optional[np.ndarray] = None,
                  values: Optional[np.ndarray] = None) -> PanelGenerator:
    """
    Get the generator for ``spec.kind``

    Args:
        spec: Generator specification
        knots, values: Tabulated curves, custom design only

    Returns:
        PanelGenerator: validated generator

    Usage:
        result = get_generator(GeneratorSpec(kind="expar", seed=7)).generate()
        panel = result.panel
    """
    if spec.kind == GeneratorKind.CUSTOM:
        return CustomCurveGenerator(spec, knots, values)
    return GENERATORS[spec.kind](spec)


def simulate(spec: GeneratorSpec, knots: Optional[np.ndarray] = None, values: Optional[np.ndarray] = None,
             threads: Optional[int] = 1) -> SimulationResult:
    return get_generator(spec, knots, values).generate(threads)


def _expect(spec: GeneratorSpec, *kinds: GeneratorKind) -> None:
    if spec.kind not in kinds:
        raise SpecError(f"Expected a {' or '.join(k.value for k in kinds)} specification, got {spec.kind.value}")


def simulate_expar(spec: GeneratorSpec, threads: Optional[int] = 1) -> SimulationResult:
    _expect(spec, GeneratorKind.EXPAR)
    return simulate(spec, threads=threads)


def simulate_sigmoid_groups(spec: GeneratorSpec, threads: Optional[int] = 1) -> SimulationResult:
    _expect(spec, GeneratorKind.SIGMOID_TWO_GROUP)
    return simulate(spec, threads=threads)


def simulate_linear_var(spec: GeneratorSpec, threads: Optional[int] = 1) -> SimulationResult:
    _expect(spec, GeneratorKind.LINEAR_VAR)
    return simulate(spec, threads=threads)


def simulate_tar(spec: GeneratorSpec, threads: Optional[int] = 1) -> SimulationResult:
    _expect(spec, GeneratorKind.TAR)
    return simulate(spec, threads=threads)


def simulate_custom(knots: np.ndarray, values: np.ndarray, spec: GeneratorSpec,
                    threads: Optional[int] = 1) -> SimulationResult:
    _expect(spec, GeneratorKind.CUSTOM)
    return simulate(spec, knots, values, threads=threads)
