"""
Panel container, kernels and reference-signal handling shared by all modules
"""

from .types import KernelKind, Panel, ReferenceGrid, ReferenceSignal
from .kernels import kernel_value, scaled_kernel_weight
from .reference import extract_reference, build_grid, rule_of_thumb_bandwidth
from .panel_io import PanelReport, validate_panel, load_panel, load_exogenous, write_panel, panel_to_frame

__all__ = [
    "KernelKind",
    "Panel",
    "ReferenceGrid",
    "ReferenceSignal",
    "kernel_value",
    "scaled_kernel_weight",
    "extract_reference",
    "build_grid",
    "rule_of_thumb_bandwidth",
    "PanelReport",
    "validate_panel",
    "load_panel",
    "load_exogenous",
    "write_panel",
    "panel_to_frame",
]
