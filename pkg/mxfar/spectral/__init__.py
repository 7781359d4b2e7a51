"""
Functional partial directed coherence, edge significance and networks
"""

from .fpdc import FpdcSurface, bar_f, fpdc, fpdc_modulus, lag_matrices, mean_fpdc, omega_grid, subject_fpdc
from .significance import EdgeSignificance, amplitude_regimes, edge_significance, zero_link
from .network import NetworkSummary, network_summary, split_windows

__all__ = [
    "FpdcSurface",
    "bar_f",
    "fpdc",
    "fpdc_modulus",
    "lag_matrices",
    "mean_fpdc",
    "omega_grid",
    "subject_fpdc",
    "EdgeSignificance",
    "amplitude_regimes",
    "edge_significance",
    "zero_link",
    "NetworkSummary",
    "network_summary",
    "split_windows",
]
