"""Causally-aware unsupervised feature selection."""
from .dataset import (DataMatrix, SyntheticSpec, TreatmentDesign, derive_treatment, load_dataset,
                      save_csv, standardize, synthesize)
from .estimator import CauseFS
from .evaluation import acc, causal_precision, evaluate_ranking, kmeans, nmi, variance_baseline
from .regression import FeatureRanking, rank_features
from .solver import HyperParams, ModelState, fit, objective_value

__all__ = [
    "CauseFS", "DataMatrix", "FeatureRanking", "HyperParams", "ModelState", "SyntheticSpec",
    "TreatmentDesign", "acc", "causal_precision", "derive_treatment", "evaluate_ranking", "fit",
    "kmeans", "load_dataset", "nmi", "objective_value", "rank_features", "save_csv",
    "standardize", "synthesize", "variance_baseline",
]

__version__ = "0.1.0"
