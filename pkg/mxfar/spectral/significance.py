"""
Bootstrap significance of directed fPDC edges

An edge g -> j is significant at u0 when the lower bootstrap confidence bound
of |mean fPDC[j, g]| exceeds the link-null threshold at some frequency. The
threshold is the (1 - alpha_level) quantile, over replicates generated with
the g -> j coefficients zeroed, of max over omega of |mean fPDC[j, g]|.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Dict, Optional, Sequence

import numpy as np
import pandas as pd

from mxfar.core.reference import extract_reference
from mxfar.core.types import Panel
from mxfar.estimator.fit import fit_mxfar
from mxfar.estimator.types import CoefficientGrid
from mxfar.exceptions import SpecError
from mxfar.inference.bootstrap import MIN_BAND_REPLICATES, POOLING_SUBJECT, band_quantiles, bootstrap_grids
from mxfar.spectral.fpdc import check_omegas, fpdc_modulus, omega_grid

if TYPE_CHECKING:
    from mxfar.models import ModelConfig

logger = logging.getLogger(__name__)

DEFAULT_REGIME_QUANTILES = {"small": 0.2, "large": 0.8}
THRESHOLD_METHOD = "link-null bootstrap quantile of max_omega |mean fPDC|"


def amplitude_regimes(panel: Panel, config: ModelConfig,
                      quantiles: Optional[Dict[str, float]] = None) -> Dict[str, float]:
    """Named u0 values at pooled quantiles of the reference signal"""
    quantiles = DEFAULT_REGIME_QUANTILES if quantiles is None else quantiles
    pooled = extract_reference(panel, config.reference).pooled(start=config.burn_in)
    return {name: float(np.quantile(pooled, q)) for name, q in quantiles.items()}


def zero_link(table: np.ndarray, target: int, source: int, n_channels: int) -> np.ndarray:
    """Copy of a coefficient table (..., k, kp) with every lag of source -> target set to 0"""
    out = np.array(table, copy=True)
    p = out.shape[-1] // n_channels
    out[..., target, [lag * n_channels + source for lag in range(p)]] = 0.0
    return out


@dataclass
class EdgeSignificance:
    """Arrays indexed (group, u0 point, ...) with channel axes (target j, source g)"""
    omegas: np.ndarray
    u0: np.ndarray
    labels: Sequence[str]
    modulus: np.ndarray       # (G, S, W, k, k)
    lower: np.ndarray         # (G, S, W, k, k)
    upper: np.ndarray         # (G, S, W, k, k)
    threshold: np.ndarray     # (G, S, k, k), NaN on the diagonal
    significant: np.ndarray   # (G, S, k, k), False on the diagonal
    level: float
    n_replicates: int
    method: str = THRESHOLD_METHOD

    def to_frame(self) -> pd.DataFrame:
        """``group,target,source,omega,u0,modulus,ci_lo,ci_hi,threshold,significant``"""
        n_groups, n_points, n_omega, k, _ = self.modulus.shape
        g, s, w, target, source = np.meshgrid(np.arange(n_groups), np.arange(n_points), np.arange(n_omega),
                                              np.arange(k), np.arange(k), indexing="ij")
        return pd.DataFrame({
            "group": g.reshape(-1),
            "target": target.reshape(-1) + 1,
            "source": source.reshape(-1) + 1,
            "omega": self.omegas[w.reshape(-1)],
            "u0": self.u0[s.reshape(-1)],
            "modulus": self.modulus.reshape(-1),
            "ci_lo": self.lower.reshape(-1),
            "ci_hi": self.upper.reshape(-1),
            "threshold": self.threshold[g, s, target, source].reshape(-1),
            "significant": self.significant[g, s, target, source].reshape(-1).astype(int),
        })


def edge_significance(panel: Panel, config: ModelConfig, n_replicates: int, alpha_level: float = 0.05, *,
                      omegas: Optional[np.ndarray] = None, u0: Optional[Dict[str, float]] = None,
                      seed: int = 0, threads: Optional[int] = 1, pooling: str = POOLING_SUBJECT,
                      fitted: Optional[CoefficientGrid] = None) -> EdgeSignificance:
    """
    Flag significant directed edges of the mean fPDC at selected u0 values.

    Args:
        panel: Observed panel
        config: MX-FAR configuration
        n_replicates: B per bootstrap (the confidence band and every link null)
        alpha_level: Significance level; the band has coverage 1 - alpha_level
        omegas: Frequencies in (0, 0.5); 64 equispaced points by default
        u0: Named reference values; the small/large amplitude regimes by default
        seed: Root seed; the band and each link null use their own substream
        fitted: Reuse an existing fit of ``panel``

    Returns:
        EdgeSignificance
    """
    if not 0 < alpha_level < 1:
        raise SpecError(f"alpha_level must lie in (0, 1), got {alpha_level}")
    if n_replicates < MIN_BAND_REPLICATES:
        logger.warning(f"Only {n_replicates} replicates; significance flags are unreliable below {MIN_BAND_REPLICATES}")
    omegas = check_omegas(omega_grid() if omegas is None else omegas)
    if fitted is None:
        fitted = fit_mxfar(panel, config, threads=threads)
    if u0 is None:
        u0 = amplitude_regimes(panel, config)
    labels = list(u0)
    u0_values = np.array([u0[name] for name in labels], dtype=float)
    segments = fitted.grid.segment_of(u0_values)
    k = fitted.n_channels

    def modulus_at_points(grid: CoefficientGrid) -> np.ndarray:
        alpha = grid.alpha()[grid.nearest_fitted()][segments]                  # (S, G, k, kp)
        return np.swapaxes(fpdc_modulus(alpha, omegas), 0, 1)                  # (G, S, W, k, k)

    estimate = modulus_at_points(fitted)
    band = bootstrap_grids(panel, fitted, n_replicates, seed, collect=modulus_at_points, threads=threads,
                           pooling=pooling, label="fPDC band", stream=(1,))
    lower, upper = band_quantiles(np.stack(band.results), 1 - alpha_level)

    threshold = np.full(estimate.shape[:2] + (k, k), np.nan)
    table = fitted.subject_coefficients(fill_gaps=True)
    for target in range(k):
        for source in range(k):
            if source == target:
                continue
            null_table = zero_link(table, target, source, k)
            run = bootstrap_grids(
                panel, fitted, n_replicates, seed,
                collect=lambda grid, j=target, g=source: modulus_at_points(grid)[:, :, :, j, g].max(axis=2),
                threads=threads, pooling=pooling, coefficient_table=null_table,
                label=f"link null {source + 1}->{target + 1}", stream=(2, target, source))
            threshold[:, :, target, source] = np.quantile(np.stack(run.results), 1 - alpha_level, axis=0)

    significant = np.any(lower > threshold[:, :, None, :, :], axis=2)
    significant[:, :, np.arange(k), np.arange(k)] = False
    logger.info(f"{int(significant.sum())} significant edge(s) over {len(labels)} u0 value(s)")
    return EdgeSignificance(omegas=omegas, u0=u0_values, labels=labels, modulus=estimate, lower=lower, upper=upper,
                            threshold=threshold, significant=significant, level=1 - alpha_level,
                            n_replicates=band.n_effective)
