"""
Local-linear FAR and mixed-effects MX-FAR estimation
"""

from .types import ChannelFit, ChannelVariance, CoefficientGrid, LocalFit, VarianceComponents
from .design import LaggedRows, LocalDesign, build_local_design, lag_matrix, lagged_rows
from .henderson import HendersonSolution, penalty_matrix, solve_henderson_block, weighted_least_squares
from .fit import (
    Residuals,
    estimate_all_variance_components,
    estimate_variance_components,
    fit_far_local,
    fit_independent,
    fit_mxfar,
    fit_mxfar_channel,
    predict_one_step,
    predict_panel,
    residuals,
)
from .export import coefficients_frame, subject_effects_frame, fit_summary, write_coefficient_grid

__all__ = [
    "ChannelFit",
    "ChannelVariance",
    "CoefficientGrid",
    "LocalFit",
    "VarianceComponents",
    "LaggedRows",
    "LocalDesign",
    "build_local_design",
    "lag_matrix",
    "lagged_rows",
    "HendersonSolution",
    "penalty_matrix",
    "solve_henderson_block",
    "weighted_least_squares",
    "Residuals",
    "estimate_all_variance_components",
    "estimate_variance_components",
    "fit_far_local",
    "fit_independent",
    "fit_mxfar",
    "fit_mxfar_channel",
    "predict_one_step",
    "predict_panel",
    "residuals",
    "coefficients_frame",
    "subject_effects_frame",
    "fit_summary",
    "write_coefficient_grid",
]
