"""
Accumulated-prediction-error model selection
"""

from .ape import ApeReport, CandidateApe, ape_for_candidate, candidate_configs, default_horizon, select_model, subseries_lengths

__all__ = [
    "ApeReport",
    "CandidateApe",
    "ape_for_candidate",
    "candidate_configs",
    "default_horizon",
    "select_model",
    "subseries_lengths",
]
