"""Reference-signal extraction and grid discretization"""
from __future__ import annotations

import logging
from typing import TYPE_CHECKING, Optional

import numpy as np

from mxfar.core.types import Panel, ReferenceGrid, ReferenceSignal
from mxfar.exceptions import DegenerateReferenceError, SpecError

if TYPE_CHECKING:
    from mxfar.models import ModelConfig, ReferenceSpec

logger = logging.getLogger(__name__)


def shift_series(series: np.ndarray, lag: int) -> np.ndarray:
    """Shift the last axis forward by ``lag``; the first ``lag`` entries become NaN"""
    shifted = np.full(series.shape, np.nan)
    if lag == 0:
        shifted[...] = series
    else:
        shifted[..., lag:] = series[..., :-lag]
    return shifted


def extract_reference(panel: Panel, spec: ReferenceSpec) -> ReferenceSignal:
    """
    Build U_t for every subject.

    Channel-sourced references use U_t = Y_{j*, t-d}; exogenous references use
    the panel's exogenous series shifted by d. Entries without a past value are
    NaN and flagged unusable.

    Args:
        panel: Observed panel
        spec: Reference specification (1-based channel index)

    Returns:
        ReferenceSignal with values of shape (N, T)

    Raises:
        SpecError: channel or lag out of range, or missing exogenous series
    """
    if spec.lag >= panel.n_time:
        raise SpecError(f"Reference lag {spec.lag} leaves no usable points in a series of length {panel.n_time}")

    if spec.source == "channel":
        if spec.channel is None or not 1 <= spec.channel <= panel.n_channels:
            raise SpecError(f"Reference channel {spec.channel} outside 1..{panel.n_channels}")
        source = panel.values[:, spec.channel - 1, :]
    else:
        if panel.exogenous is None:
            raise SpecError("Exogenous reference requested but the panel carries no exogenous series")
        source = panel.exogenous

    values = shift_series(source, spec.lag)
    usable = np.zeros(values.shape, dtype=bool)
    usable[:, spec.lag:] = True
    return ReferenceSignal(values=values, usable=usable)


def build_grid(panel: Panel, config: ModelConfig, reference: Optional[ReferenceSignal] = None) -> ReferenceGrid:
    """
    Segment the clipped pooled reference support into M equal intervals.

    Args:
        panel: Observed panel
        config: Model configuration (grid size, clipping quantiles)
        reference: Pre-extracted reference signal, extracted from the panel when omitted

    Returns:
        ReferenceGrid whose points are the segment midpoints

    Raises:
        DegenerateReferenceError: if the clipped range is empty
    """
    if reference is None:
        reference = extract_reference(panel, config.reference)
    pooled = reference.pooled(start=config.burn_in)
    if pooled.size == 0:
        raise DegenerateReferenceError("No usable reference values after burn-in")

    low, high = np.quantile(pooled, config.grid_clip)
    if not high > low:
        raise DegenerateReferenceError(f"Reference signal has zero range after clipping ({low} to {high})")

    edges = np.linspace(low, high, config.grid_size + 1)
    logger.debug(f"Grid of {config.grid_size} segments on [{low:.4g}, {high:.4g}]")
    return ReferenceGrid(edges=edges)


def rule_of_thumb_bandwidth(panel: Panel, spec: ReferenceSpec, start: int = 0) -> float:
    """
    Scott's rule 1.06 sd n^(-1/5) on the pooled usable reference values.

    Used when no bandwidth is given; APE selection is the principled choice.

    Raises:
        DegenerateReferenceError: if the pooled reference is constant
    """
    pooled = extract_reference(panel, spec).pooled(start=start)
    sd = float(np.std(pooled)) if pooled.size else 0.0
    if not sd > 0:
        raise DegenerateReferenceError("Reference signal is constant; no default bandwidth")
    return 1.06 * sd * pooled.size ** (-0.2)
