"""
Bootstrap inference: nonlinearity test and coefficient bands
"""

from .null_model import NullModel, fit_null_mevar
from .bootstrap import (
    POOLING_ALL,
    POOLING_SUBJECT,
    CoefficientBand,
    NonlinearityTestResult,
    ReplicateRun,
    band_quantiles,
    bootstrap_grids,
    center_residuals,
    coefficient_bands,
    generate_recursive,
    nonlinearity_test,
    replicate_rng,
    resample_residuals,
    rss_ratio,
    run_replicates,
)

__all__ = [
    "NullModel",
    "fit_null_mevar",
    "POOLING_ALL",
    "POOLING_SUBJECT",
    "CoefficientBand",
    "NonlinearityTestResult",
    "ReplicateRun",
    "band_quantiles",
    "bootstrap_grids",
    "center_residuals",
    "coefficient_bands",
    "generate_recursive",
    "nonlinearity_test",
    "replicate_rng",
    "resample_residuals",
    "rss_ratio",
    "run_replicates",
]
