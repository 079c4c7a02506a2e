from .ensemble import (
    ADABOOST,
    GRADIENT_BOOSTING,
    MODEL_KINDS,
    MODEL_NAMES,
    RANDOM_FOREST,
    EnsembleModel,
    feature_importance,
    fit_adaboost,
    fit_frame,
    fit_gradient_boosting,
    fit_model,
    fit_random_forest,
    predict,
)
from .tree import DecisionTree, TreeConfig, fit_tree

__all__ = [
    "ADABOOST",
    "GRADIENT_BOOSTING",
    "MODEL_KINDS",
    "MODEL_NAMES",
    "RANDOM_FOREST",
    "DecisionTree",
    "EnsembleModel",
    "TreeConfig",
    "feature_importance",
    "fit_adaboost",
    "fit_frame",
    "fit_gradient_boosting",
    "fit_model",
    "fit_random_forest",
    "fit_tree",
    "predict",
]
