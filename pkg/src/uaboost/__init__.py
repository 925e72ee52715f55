"""Uncertainty-aware boosted ensembles for multi-modal regression."""

from .core import (
    SIGMA_FLOOR,
    WEIGHT_FLOOR,
    BaseLearner,
    EnsembleMode,
    ModalityMatrix,
    ProbabilisticPrediction,
    fuse_inverse_uncertainty,
    fuse_mean,
    normalize_weights,
)
from .ensemble import BoostChain, boost_fit, derive_weights, predict, rank_modalities
from .forest import ForestConfig, RandomForest
from .mlp import GaussianMLP, MlpConfig, gaussian_nll

__version__ = "0.1.0"

__all__ = [
    "SIGMA_FLOOR", "WEIGHT_FLOOR", "BaseLearner", "EnsembleMode", "ModalityMatrix", "ProbabilisticPrediction",
    "fuse_inverse_uncertainty", "fuse_mean", "normalize_weights", "BoostChain", "boost_fit", "derive_weights",
    "predict", "rank_modalities", "ForestConfig", "RandomForest", "GaussianMLP", "MlpConfig", "gaussian_nll",
]
