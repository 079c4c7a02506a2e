"""Random forest, SAMME AdaBoost and multinomial gradient boosting over CART trees."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..classes import N_CLASSES
from ..errors import EmptyFrame, SchemaMismatch
from ..features import FeatureFrame
from .rng import derive_seed, generator
from .tree import DecisionTree, TreeConfig, grow_classification_tree, grow_regression_tree

RANDOM_FOREST = "rf"
ADABOOST = "adaboost"
GRADIENT_BOOSTING = "gb"
MODEL_KINDS = (ADABOOST, RANDOM_FOREST, GRADIENT_BOOSTING)
MODEL_NAMES = {
    ADABOOST: "Adaboost",
    RANDOM_FOREST: "Random Forest",
    GRADIENT_BOOSTING: "Gradient Boosting",
}

RF_PARAMS = {"n_estimators": 10, "criterion": "gini", "max_depth": None, "max_features": "sqrt", "bootstrap": True}
ADA_PARAMS = {"n_estimators": 50, "learning_rate": 1.0, "base_max_depth": 1, "algorithm": "SAMME"}
GB_PARAMS = {"n_estimators": 100, "learning_rate": 0.1, "max_depth": 3, "loss": "multinomial_deviance"}

FORMAT_VERSION = 1


@dataclass
class EnsembleModel:
    kind: str
    features: tuple[str, ...]
    classes: tuple[int, ...]
    params: dict
    seed: int
    trees: list[DecisionTree] = field(default_factory=list)
    weights: list[float] = field(default_factory=list)
    init_score: list[float] = field(default_factory=list)
    fallback: int = 0
    train_loss: list[float] = field(default_factory=list)

    @property
    def n_features(self) -> int:
        return len(self.features)

    # -- prediction -------------------------------------------------------
    def decision(self, X: np.ndarray) -> np.ndarray:
        """Per-class scores over the canonical classes; argmax gives the prediction."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        n = X.shape[0]
        scores = np.zeros((n, N_CLASSES))
        if self.kind == RANDOM_FOREST:
            for tree in self.trees:
                scores += tree.predict_value(X)
            scores /= max(len(self.trees), 1)
        elif self.kind == ADABOOST:
            for tree, alpha in zip(self.trees, self.weights):
                scores[np.arange(n), tree.predict(X)] += alpha
        elif self.kind == GRADIENT_BOOSTING:
            scores[:] = -np.inf
            k = len(self.classes)
            raw = np.tile(np.asarray(self.init_score), (n, 1)) if k else np.zeros((n, 0))
            lr = self.params["learning_rate"]
            for i, tree in enumerate(self.trees):
                raw[:, i % k] += lr * tree.predict_value(X)[:, 0]
            scores[:, list(self.classes)] = raw
        else:
            raise ValueError(f"unknown model kind {self.kind!r}")
        return scores

    def predict_array(self, X: np.ndarray) -> np.ndarray:
        if not self.trees:
            return np.full(np.asarray(X).shape[0], self.fallback, dtype=np.int64)
        return np.argmax(self.decision(X), axis=1).astype(np.int64)

    # -- serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": self.kind,
            "features": list(self.features),
            "classes": list(self.classes),
            "params": self.params,
            "seed": self.seed,
            "fallback": self.fallback,
            "init_score": list(self.init_score),
            "weights": list(self.weights),
            "train_loss": list(self.train_loss),
            "trees": [t.to_dict() for t in self.trees],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "EnsembleModel":
        if d.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {d.get('format_version')!r}")
        return cls(
            kind=d["kind"],
            features=tuple(d["features"]),
            classes=tuple(d["classes"]),
            params=d["params"],
            seed=d["seed"],
            trees=[DecisionTree.from_dict(t) for t in d["trees"]],
            weights=[float(w) for w in d["weights"]],
            init_score=[float(s) for s in d["init_score"]],
            fallback=d["fallback"],
            train_loss=[float(v) for v in d["train_loss"]],
        )

    @classmethod
    def from_json(cls, text: str) -> "EnsembleModel":
        return cls.from_dict(json.loads(text))


def _check(X, y, features: Sequence[str]) -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyFrame("cannot fit on an empty frame")
    if len(y) != X.shape[0]:
        raise ValueError("X and y lengths differ")
    names = tuple(features) or tuple(f"f{j}" for j in range(X.shape[1]))
    if len(names) != X.shape[1]:
        raise SchemaMismatch(f"{len(names)} feature names for {X.shape[1]} columns")
    return X, y, names


def _majority(y: np.ndarray) -> int:
    return int(np.argmax(np.bincount(y, minlength=N_CLASSES)))


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def random_forest(
    X, y, seed: int, features: Sequence[str] = (), threads: int = 1, n_estimators: int = 10
) -> EnsembleModel:
    """Bagged unlimited-depth Gini trees with sqrt(d) features tried per split.

    Tree ``i`` draws its bootstrap and split stream from seeds derived from
    (seed, i), so results do not depend on ``threads``.
    """
    X, y, features = _check(X, y, features)
    n, d = X.shape
    config = TreeConfig(max_depth=None, max_features=max(1, int(math.isqrt(d))), min_rows=2)

    def one(i: int) -> DecisionTree:
        rng = generator(seed, "rf", i, "bootstrap")
        counts = np.bincount(rng.integers(0, n, size=n), minlength=n).astype(np.float64)
        return grow_classification_tree(X, y, counts, config, derive_seed(seed, "rf", i, "splits"))

    trees = _map(one, range(n_estimators), threads)
    params = dict(RF_PARAMS, n_estimators=n_estimators)
    return EnsembleModel(
        RANDOM_FOREST, tuple(features), tuple(np.unique(y).tolist()), params, seed,
        trees=trees, weights=[1.0] * len(trees), fallback=_majority(y),
    )


def adaboost(
    X, y, seed: int, features: Sequence[str] = (), n_estimators: int = 50, learning_rate: float = 1.0
) -> EnsembleModel:
    """Multiclass SAMME with depth-1 stumps.

    Stops early when a stump is perfect (kept with weight 1) or when its
    weighted error reaches 1 - 1/K (discarded).
    """
    X, y, features = _check(X, y, features)
    present = np.unique(y)
    k = len(present)
    params = dict(ADA_PARAMS, n_estimators=n_estimators, learning_rate=learning_rate)
    model = EnsembleModel(ADABOOST, tuple(features), tuple(present.tolist()), params, seed, fallback=_majority(y))
    if k < 2:
        return model
    n = len(y)
    w = np.full(n, 1.0 / n)
    stump = TreeConfig(max_depth=1, max_features=None, min_rows=2)
    for stage in range(n_estimators):
        tree = grow_classification_tree(X, y, w, stump, derive_seed(seed, "ada", stage))
        miss = tree.predict(X) != y
        err = float(np.sum(w[miss]) / np.sum(w))
        if err <= 0.0:
            model.trees.append(tree)
            model.weights.append(1.0)
            break
        if err >= 1.0 - 1.0 / k:
            break
        alpha = learning_rate * (math.log((1.0 - err) / err) + math.log(k - 1))
        model.trees.append(tree)
        model.weights.append(alpha)
        w = w * np.exp(alpha * miss)
        w /= w.sum()
    return model


def _softmax(raw: np.ndarray) -> np.ndarray:
    z = raw - raw.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _log_loss(raw: np.ndarray, target: np.ndarray) -> float:
    z = raw - raw.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return float(-np.mean(logp[np.arange(len(target)), target]))


def gradient_boosting(
    X,
    y,
    seed: int,
    features: Sequence[str] = (),
    threads: int = 1,
    n_estimators: int = 100,
    learning_rate: float = 0.1,
    max_depth: int = 3,
) -> EnsembleModel:
    """Multinomial-deviance boosting: one squared-error tree per class per stage.

    Scores start at the log class priors; leaves take the Newton step
    (K-1)/K * sum(r) / sum(p(1-p)) on the softmax residuals r = y - p.
    """
    X, y, features = _check(X, y, features)
    present = np.unique(y)
    k = len(present)
    params = dict(GB_PARAMS, n_estimators=n_estimators, learning_rate=learning_rate, max_depth=max_depth)
    model = EnsembleModel(GRADIENT_BOOSTING, tuple(features), tuple(present.tolist()), params, seed, fallback=_majority(y))
    if k < 2:
        return model
    target = np.searchsorted(present, y)
    onehot = np.eye(k)[target]
    prior = onehot.mean(axis=0)
    model.init_score = np.log(prior).tolist()
    raw = np.tile(np.log(prior), (len(y), 1))
    factor = (k - 1) / k

    def fit_class(args) -> tuple[DecisionTree, np.ndarray]:
        c, p = args
        resid = onehot[:, c] - p[:, c]
        tree = grow_regression_tree(X, resid, max_depth=max_depth)
        leaves = tree.apply(X)
        num = np.bincount(leaves, weights=resid, minlength=tree.n_nodes)
        pc = p[:, c]
        den = np.bincount(leaves, weights=pc * (1.0 - pc), minlength=tree.n_nodes)
        safe = np.abs(den) >= 1e-150
        gamma = np.where(safe, factor * num / np.where(safe, den, 1.0), 0.0)
        gamma[tree.feature >= 0] = 0.0
        tree.value[:, 0] = gamma
        return tree, gamma[leaves]

    model.train_loss.append(_log_loss(raw, target))
    for _ in range(n_estimators):
        p = _softmax(raw)
        fitted = _map(fit_class, [(c, p) for c in range(k)], threads)
        for c, (tree, update) in enumerate(fitted):
            model.trees.append(tree)
            raw[:, c] += learning_rate * update
        model.train_loss.append(_log_loss(raw, target))
    return model


def fit_model(kind: str, X, y, seed: int, features: Sequence[str] = (), threads: int = 1) -> EnsembleModel:
    if kind == RANDOM_FOREST:
        return random_forest(X, y, seed, features, threads=threads)
    if kind == ADABOOST:
        return adaboost(X, y, seed, features)
    if kind == GRADIENT_BOOSTING:
        return gradient_boosting(X, y, seed, features, threads=threads)
    raise ValueError(f"unknown model kind {kind!r}; expected one of {', '.join(MODEL_KINDS)}")


def fit_random_forest(frame: FeatureFrame, seed: int, threads: int = 1) -> EnsembleModel:
    if frame.n_rows == 0:
        raise EmptyFrame(f"frame {frame.name!r} has no rows")
    return random_forest(frame.values, frame.label, seed, frame.features, threads=threads)


def fit_adaboost(frame: FeatureFrame, seed: int) -> EnsembleModel:
    if frame.n_rows == 0:
        raise EmptyFrame(f"frame {frame.name!r} has no rows")
    return adaboost(frame.values, frame.label, seed, frame.features)


def fit_gradient_boosting(frame: FeatureFrame, seed: int, threads: int = 1) -> EnsembleModel:
    if frame.n_rows == 0:
        raise EmptyFrame(f"frame {frame.name!r} has no rows")
    return gradient_boosting(frame.values, frame.label, seed, frame.features, threads=threads)


def fit_frame(kind: str, frame: FeatureFrame, seed: int, threads: int = 1) -> EnsembleModel:
    if frame.n_rows == 0:
        raise EmptyFrame(f"frame {frame.name!r} has no rows")
    return fit_model(kind, frame.values, frame.label, seed, frame.features, threads)


def predict(model: EnsembleModel, frame: FeatureFrame) -> np.ndarray:
    """Predicted canonical class index per row."""
    if tuple(frame.features) != tuple(model.features):
        raise SchemaMismatch(
            f"model expects features {list(model.features)}, frame has {list(frame.features)}"
        )
    return model.predict_array(frame.values)


def feature_importance(model: EnsembleModel) -> list[tuple[str, float]]:
    """Impurity-decrease importance summed over members, normalized to 1, descending."""
    d = model.n_features
    total = np.zeros(d)
    for i, tree in enumerate(model.trees):
        scale = model.weights[i] if model.kind == ADABOOST else 1.0
        total += scale * tree.importance(d)
    s = total.sum()
    scores = total / s if s > 0 else np.zeros(d)
    order = sorted(range(d), key=lambda j: (-scores[j], j))
    return [(model.features[j], float(scores[j])) for j in order]
