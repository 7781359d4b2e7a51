"""Error hierarchy for the mxfar toolkit.

Every error carries a short category label and the process exit code the
command-line pipeline reports for it.
"""
from typing import Optional, List


class MxfarError(Exception):
    """Base class for all domain errors"""
    category = "error"
    exit_code = 1


# ----------------------------------------------------------------------------
# Specification / configuration
# ----------------------------------------------------------------------------

class SpecError(MxfarError):
    """Invalid reference, generator or model specification"""
    category = "spec"
    exit_code = 2


class InvalidBandwidthError(SpecError):
    """Kernel bandwidth must be strictly positive"""


class DegenerateReferenceError(SpecError):
    """Reference signal has zero range after clipping"""


class ConfigurationError(SpecError):
    """Flags or configuration files failed validation"""


# ----------------------------------------------------------------------------
# Data
# ----------------------------------------------------------------------------

class DataError(MxfarError):
    category = "data"
    exit_code = 3


class IngestionError(DataError):
    """Panel CSV violates the input contract"""

    def __init__(self, message: str, violations: Optional[List[str]] = None):
        super().__init__(message)
        self.violations = list(violations or [])


class EmptyDesignError(DataError):
    """No usable rows remain after removing burn-in"""


class InsufficientDataError(DataError):
    """Too few in-bandwidth observations to identify the local fit"""


class EmptyNeighborhoodError(DataError):
    """No observation has positive kernel weight at the grid point"""


class VarianceUndefinedError(DataError):
    """Across-subject variance needs at least two subjects"""


class SubseriesError(DataError):
    """Series too short for the requested APE subseries"""


# ----------------------------------------------------------------------------
# Numerical
# ----------------------------------------------------------------------------

class NumericalError(MxfarError):
    category = "numerical"
    exit_code = 4


class SingularDesignError(NumericalError):
    """Normal matrix singular or ill-conditioned after ridge jitter"""


class SingularSystemError(NumericalError):
    """Henderson system could not be solved"""

    def __init__(self, message: str, subject: Optional[str] = None):
        super().__init__(message)
        self.subject = subject


class GapError(NumericalError):
    """Prediction needs a grid point that failed to fit"""


class FitFailureError(NumericalError):
    """Too many grid points failed to fit"""


# ----------------------------------------------------------------------------
# Inference
# ----------------------------------------------------------------------------

class InferenceError(MxfarError):
    category = "inference"
    exit_code = 5


class SelectionError(InferenceError):
    """Every APE candidate failed"""


class BootstrapError(InferenceError):
    """Too many bootstrap replicates failed"""


# ----------------------------------------------------------------------------
# Simulation
# ----------------------------------------------------------------------------

class SimulationError(MxfarError):
    category = "simulation"
    exit_code = 6


class GenerationError(SimulationError):
    """Generated series broke the boundedness guard"""


class StabilityError(SimulationError):
    """Linear coefficients are not stable"""


class ExtrapolationError(SimulationError):
    """Reference left the tabulated range of a custom curve"""
