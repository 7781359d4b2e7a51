"""
mxfar - mixed-effects functional-coefficient autoregression for multi-subject
multichannel panels

Sub-packages:
    core       panel container, kernels, reference signals, CSV contract
    estimator  local-linear FAR and mixed-effects MX-FAR fits
    selection  accumulated-prediction-error model selection
    inference  bootstrap nonlinearity test and coefficient bands
    spectral   functional PDC, edge significance and networks
    simulator  reproducible synthetic panels
"""

from .config import __version__

__all__ = ["__version__"]
