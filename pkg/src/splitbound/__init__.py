"""Bounds on the benefit of training separate classifiers per group."""
from .core import (
    Classifier,
    GroupedDataset,
    HypothesisClass,
    LabeledSample,
    disagreement,
    l1_risk,
    risk_report,
)
from .bounds import (
    complexity_omega,
    finite_sample_bounds_cor1,
    sample_limited_splitting,
    empirical_benefit_of_splitting,
)
from .divergence import tv_exact_discrete, tv_variational, TvWitnessConfig
from .learn import train_split, train_group_blind, exact_minimax, TrainConfig, MinimaxConfig

__version__ = "0.1.0"

__all__ = [
    "Classifier", "GroupedDataset", "HypothesisClass", "LabeledSample",
    "MinimaxConfig", "TrainConfig", "TvWitnessConfig",
    "complexity_omega", "disagreement", "empirical_benefit_of_splitting", "exact_minimax",
    "finite_sample_bounds_cor1", "l1_risk", "risk_report", "sample_limited_splitting",
    "train_group_blind", "train_split", "tv_exact_discrete", "tv_variational",
]
