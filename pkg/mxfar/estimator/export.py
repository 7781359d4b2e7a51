"""Tabular export of fitted coefficient grids"""
import json
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np
import pandas as pd

from mxfar.estimator.types import CoefficientGrid

COEFFICIENTS_FILE = "coefficients.csv"
SUBJECT_EFFECTS_FILE = "subject_effects.csv"
FIT_SUMMARY_FILE = "fit_summary.json"


def regressor_labels(n_channels: int, p: int) -> List[tuple]:
    """(source channel, lag) of every coefficient column, both 1-based"""
    return [(g + 1, lag + 1) for lag in range(p) for g in range(n_channels)]


def coefficients_frame(grid: CoefficientGrid) -> pd.DataFrame:
    """``channel,group,target_lag_channel,lag,u0,alpha,beta``; gap grid points are omitted"""
    labels = regressor_labels(grid.n_channels, grid.config.p)
    records = []
    for j in range(grid.n_channels):
        for group in range(grid.n_groups):
            for r, (source, lag) in enumerate(labels):
                for fit in grid.fits:
                    if fit is None:
                        continue
                    records.append((j + 1, group, source, lag, fit.u0, fit.alpha[group, j, r], fit.beta[group, j, r]))
    return pd.DataFrame.from_records(
        records, columns=["channel", "group", "target_lag_channel", "lag", "u0", "alpha", "beta"])


def subject_effects_frame(grid: CoefficientGrid) -> pd.DataFrame:
    """``subject_id,channel,target_lag_channel,lag,u0,a,b``"""
    labels = regressor_labels(grid.n_channels, grid.config.p)
    records = []
    for n, subject in enumerate(grid.subject_ids):
        for j in range(grid.n_channels):
            for r, (source, lag) in enumerate(labels):
                for fit in grid.fits:
                    if fit is None:
                        continue
                    records.append((subject, j + 1, source, lag, fit.u0, fit.a[n, j, r], fit.b[n, j, r]))
    return pd.DataFrame.from_records(
        records, columns=["subject_id", "channel", "target_lag_channel", "lag", "u0", "a", "b"])


def fit_summary(grid: CoefficientGrid) -> Dict[str, Any]:
    """Noise variances, variance components and gap record for the JSON sidecar"""
    sigma2 = grid.sigma2_eps()
    per_channel = np.nanmean(sigma2, axis=0)
    return {
        "config": grid.config.model_dump(mode="json"),
        "grid": {"edges": grid.grid.edges.tolist(), "points": grid.points.tolist()},
        "subject_ids": list(grid.subject_ids),
        "group_of": grid.group_of.tolist(),
        "sigma2_eps": {
            "per_channel": per_channel.tolist(),
            "pooled": float(np.mean(per_channel)),
            "per_grid_point": [None if np.isnan(row).any() else row.tolist() for row in sigma2],
        },
        "variance_components": {
            "sigma2_alpha": grid.variance_components.sigma2_alpha.tolist(),
            "sigma2_beta": grid.variance_components.sigma2_beta.tolist(),
        },
        "gaps": [{"index": m, "u0": float(grid.points[m]), "reason": reason} for m, reason in grid.gap_reasons],
    }


def write_coefficient_grid(grid: CoefficientGrid, output_dir: Union[str, Path],
                           float_format: str = "%.10g") -> List[Path]:
    """
    Write coefficients.csv, subject_effects.csv and fit_summary.json.

    Returns:
        Paths written
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    paths = [output_dir / COEFFICIENTS_FILE, output_dir / SUBJECT_EFFECTS_FILE, output_dir / FIT_SUMMARY_FILE]
    coefficients_frame(grid).to_csv(paths[0], index=False, float_format=float_format, lineterminator="\n")
    subject_effects_frame(grid).to_csv(paths[1], index=False, float_format=float_format, lineterminator="\n")
    paths[2].write_text(json.dumps(fit_summary(grid), indent=2, sort_keys=True) + "\n")
    return paths
