"""Binary CART trees backed by the compiled growers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..classes import N_CLASSES
from ..errors import EmptyFrame
from ..features import FeatureFrame
from . import _kernels


@dataclass(frozen=True)
class TreeConfig:
    max_depth: int | None = None
    max_features: int | None = None  # None: consider every feature
    min_rows: int = 2


@dataclass(frozen=True)
class DecisionTree:
    """Array-encoded tree. Leaves have ``feature == -1``.

    For classifiers ``value`` holds one class-probability vector per node;
    for boosting regressors it holds the scalar leaf output in column 0.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for node in range(self.n_nodes):
            if self.feature[node] >= 0:
                depth[self.left[node]] = depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        return _kernels.apply_tree(self.feature, self.threshold, self.left, self.right, X)

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_value(X), axis=1)

    def importance(self, n_features: int) -> np.ndarray:
        internal = self.feature >= 0
        return np.bincount(self.feature[internal], weights=self.gain[internal], minlength=n_features)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "gain": self.gain.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=np.float64),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["value"], dtype=np.float64).reshape(len(d["feature"]), -1),
            np.asarray(d["gain"], dtype=np.float64),
        )


def _as_xy(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyFrame("cannot fit on an empty frame")
    if len(y) != X.shape[0]:
        raise ValueError("X and y lengths differ")
    return X, y


def grow_classification_tree(
    X: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray | None = None,
    config: TreeConfig = TreeConfig(),
    seed: int = 0,
    n_classes: int = N_CLASSES,
) -> DecisionTree:
    X, y = _as_xy(X, y)
    w = np.ones(len(y)) if weights is None else np.asarray(weights, dtype=np.float64)
    if np.any(w < 0) or not np.any(w > 0):
        raise ValueError("row weights must be non-negative and not all zero")
    rows = np.flatnonzero(w > 0).astype(np.int64)
    d = X.shape[1]
    max_features = d if config.max_features is None else max(1, min(d, config.max_features))
    max_depth = -1 if config.max_depth is None else config.max_depth
    parts = _kernels.grow_classifier(
        X, y, w, rows, n_classes, max_depth, max_features, config.min_rows, np.uint64(seed)
    )
    return DecisionTree(*parts)


def grow_regression_tree(
    X: np.ndarray, target: np.ndarray, max_depth: int = 3, min_rows: int = 2
) -> DecisionTree:
    """Squared-error tree with zero leaf values; callers fill leaves in."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    target = np.ascontiguousarray(target, dtype=np.float64)
    rows = np.arange(X.shape[0], dtype=np.int64)
    feature, threshold, left, right, gain = _kernels.grow_regressor(X, target, rows, max_depth, min_rows)
    value = np.zeros((len(feature), 1))
    return DecisionTree(feature, threshold, left, right, value, gain)


def fit_tree(
    frame: FeatureFrame,
    row_weights: np.ndarray | None = None,
    config: TreeConfig = TreeConfig(),
    seed: int = 0,
) -> DecisionTree:
    """Fit a Gini CART classifier on a feature frame."""
    if frame.n_rows == 0:
        raise EmptyFrame(f"frame {frame.name!r} has no rows")
    return grow_classification_tree(frame.values, frame.label, row_weights, config, seed)
