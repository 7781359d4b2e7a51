"""
Accumulated prediction error (APE) for bandwidth, order and reference selection

For q = 1..Q the model is refitted on the first T - rq points with bandwidth
h * (T / (T - rq))^(1/5) and used to predict the following r points one step
ahead from the observed lags.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from mxfar.core.types import Panel
from mxfar.estimator.fit import fit_mxfar, predict_panel
from mxfar.exceptions import MxfarError, SelectionError, SubseriesError
from mxfar.parallel import ordered_map

if TYPE_CHECKING:
    from mxfar.models import ModelConfig, ReferenceSpec

logger = logging.getLogger(__name__)

DEFAULT_SUBSERIES = 4


def default_horizon(n_time: int) -> int:
    """r = floor(0.1 T)"""
    return int(math.floor(0.1 * n_time))


def subseries_lengths(n_time: int, r: int, n_subseries: int) -> List[int]:
    """
    Lengths T - rq for q = 1..Q.

    Raises:
        SubseriesError: if T <= rQ or r < 1
    """
    if r < 1:
        raise SubseriesError(f"Prediction horizon r must be at least 1, got {r}")
    if n_time <= r * n_subseries:
        raise SubseriesError(f"Series of length {n_time} too short for Q={n_subseries} subseries of horizon r={r}")
    return [n_time - r * q for q in range(1, n_subseries + 1)]


@dataclass(frozen=True)
class CandidateApe:
    ape: float
    per_subseries: np.ndarray
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None


def ape_for_candidate(panel: Panel, config: ModelConfig, r: Optional[int] = None,
                      n_subseries: int = DEFAULT_SUBSERIES) -> CandidateApe:
    """
    APE of one candidate configuration.

    Args:
        panel: Observed panel
        config: Candidate (bandwidth, order, reference)
        r: Prediction horizon per subseries, floor(0.1 T) by default
        n_subseries: Q

    Returns:
        CandidateApe whose ape equals the sum of the per-subseries errors

    Raises:
        SubseriesError: if T <= rQ
        MxfarError: if a subseries refit fails
    """
    n_time = panel.n_time
    r = default_horizon(n_time) if r is None else r
    per_subseries = np.zeros(n_subseries)
    for q, length in enumerate(subseries_lengths(n_time, r, n_subseries)):
        bandwidth = config.bandwidth * (n_time / length) ** 0.2
        grid = fit_mxfar(panel.truncated(length), config.updated(bandwidth=bandwidth))
        predictions = predict_panel(grid, panel, fill_gaps=True, start=length, stop=length + r)
        per_subseries[q] = float(np.sum((panel.values[:, :, length:length + r] - predictions) ** 2))
    return CandidateApe(ape=float(per_subseries.sum()), per_subseries=per_subseries)


@dataclass
class ApeReport:
    """APE of every candidate and the index of the selected one"""
    candidates: List[ModelConfig]
    ape: np.ndarray
    per_subseries: np.ndarray     # (n_candidates, Q)
    best: int
    failures: Dict[int, str] = field(default_factory=dict)

    @property
    def best_config(self) -> ModelConfig:
        return self.candidates[self.best]

    def to_frame(self) -> pd.DataFrame:
        """``h,p,ref_channel,ref_lag,ape_q1..ape_qQ,ape,best_flag``"""
        frame = pd.DataFrame({
            "h": [c.bandwidth for c in self.candidates],
            "p": [c.p for c in self.candidates],
            "ref_channel": pd.array([c.reference.channel for c in self.candidates], dtype="Int64"),
            "ref_lag": [c.reference.lag for c in self.candidates],
        })
        for q in range(self.per_subseries.shape[1]):
            frame[f"ape_q{q + 1}"] = self.per_subseries[:, q]
        frame["ape"] = self.ape
        frame["best_flag"] = (np.arange(len(self.candidates)) == self.best).astype(int)
        return frame


def candidate_configs(base: ModelConfig, h_grid: Sequence[float], p_grid: Sequence[int],
                      reference_candidates: Sequence[ReferenceSpec]) -> List[ModelConfig]:
    """Cartesian product ordered by p, then reference, then h"""
    return [base.updated(p=p, reference=reference.model_dump(), bandwidth=h)
            for p, reference, h in itertools.product(p_grid, reference_candidates, h_grid)]


def select_model(panel: Panel, base: ModelConfig, h_grid: Sequence[float], p_grid: Sequence[int],
                 reference_candidates: Sequence[ReferenceSpec], *, r: Optional[int] = None,
                 n_subseries: int = DEFAULT_SUBSERIES, threads: Optional[int] = 1) -> ApeReport:
    """
    Evaluate APE over every (p, reference, h) candidate and pick the minimizer.

    Ties go to the smaller p, then the smaller h, then the earlier candidate.
    Failed candidates get infinite APE.

    Args:
        panel: Observed panel
        base: Configuration supplying kernel, grid size and penalty scale
        h_grid: Bandwidths
        p_grid: Lag orders
        reference_candidates: Reference specifications

    Raises:
        SelectionError: no candidate, or every candidate failed
        SubseriesError: if T <= rQ
    """
    candidates = candidate_configs(base, h_grid, p_grid, reference_candidates)
    if not candidates:
        raise SelectionError("No APE candidates offered")
    r = default_horizon(panel.n_time) if r is None else r
    subseries_lengths(panel.n_time, r, n_subseries)

    def evaluate(config: ModelConfig) -> CandidateApe:
        try:
            return ape_for_candidate(panel, config, r=r, n_subseries=n_subseries)
        except SubseriesError:
            raise
        except MxfarError as e:
            return CandidateApe(ape=math.inf, per_subseries=np.full(n_subseries, np.inf), error=str(e))

    results = ordered_map(evaluate, candidates, threads)
    failures = {i: result.error for i, result in enumerate(results) if result.failed}
    for i, error in failures.items():
        logger.warning(f"APE candidate {i} (p={candidates[i].p}, h={candidates[i].bandwidth:g}, "
                       f"reference={candidates[i].reference.label()}) failed: {error}")
    if len(failures) == len(candidates):
        raise SelectionError(f"All {len(candidates)} APE candidates failed")

    ape = np.array([result.ape for result in results])
    best = min(range(len(candidates)), key=lambda i: (ape[i], candidates[i].p, candidates[i].bandwidth, i))
    logger.info(f"Selected p={candidates[best].p}, h={candidates[best].bandwidth:g}, "
                f"reference={candidates[best].reference.label()} (APE {ape[best]:.6g})")
    return ApeReport(candidates=candidates, ape=ape,
                     per_subseries=np.stack([result.per_subseries for result in results]),
                     best=best, failures=failures)
