"""Stratified K-fold cross-validation and multiclass metrics."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .classes import CLASSES, N_CLASSES
from .errors import ClassTooSmall, LengthMismatch
from .features import FeatureFrame
from .ml.ensemble import fit_model
from .ml.rng import derive_seed, generator


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[k, l] = samples of true class k predicted as class l (canonical order)."""

    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts)

    def to_csv(self) -> str:
        lines = ["true\\pred," + ",".join(CLASSES)]
        for name, row in zip(CLASSES, self.counts):
            lines.append(name + "," + ",".join(str(int(v)) for v in row))
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class MetricsBundle:
    accuracy_pct: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    mcc: float


def stratified_kfold(labels: Sequence[int], k: int = 5, seed: int = 0) -> list[np.ndarray]:
    """Partition row indices into k folds preserving class proportions.

    Each class's rows are shuffled and dealt round-robin, with the deal position
    carried over between classes (taken in canonical order), so per-class and
    overall fold sizes both differ by at most one.
    """
    labels = np.asarray(labels, dtype=np.int64)
    present, counts = np.unique(labels, return_counts=True)
    for cls, cnt in zip(present, counts):
        if cnt < k:
            raise ClassTooSmall(f"class {CLASSES[cls]} has {cnt} samples, fewer than k={k} folds")
    rng = generator(seed, "kfold", k)
    assignment = np.empty(len(labels), dtype=np.int64)
    pos = 0
    for cls in present:
        members = np.flatnonzero(labels == cls)
        members = members[rng.permutation(len(members))]
        assignment[members] = (pos + np.arange(len(members))) % k
        pos += len(members)
    return [np.flatnonzero(assignment == f) for f in range(k)]


def confusion(true_labels: Sequence[int], predicted_labels: Sequence[int]) -> ConfusionMatrix:
    t = np.asarray(true_labels, dtype=np.int64)
    p = np.asarray(predicted_labels, dtype=np.int64)
    if t.shape != p.shape:
        raise LengthMismatch(f"{len(t)} true labels vs {len(p)} predictions")
    counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    return ConfusionMatrix(counts)


def _safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros_like(num, dtype=np.float64)
    np.divide(num, den, out=out, where=den > 0)
    return out


def mcc(counts: np.ndarray) -> float:
    """Multiclass Matthews correlation from the row/column marginals.

    Returns 0 when either normalising factor vanishes.
    """
    # counts are integers, so the marginal products are exact; the square root
    # is taken once over their product so perfect agreement gives exactly 1
    c = np.asarray(counts).astype(np.int64)
    s = int(c.sum())
    t = [int(v) for v in c.sum(axis=1)]
    p = [int(v) for v in c.sum(axis=0)]
    cov_tp = int(np.trace(c)) * s - sum(a * b for a, b in zip(t, p))
    cov_tt = s * s - sum(a * a for a in t)
    cov_pp = s * s - sum(b * b for b in p)
    if cov_tt <= 0 or cov_pp <= 0:
        return 0.0
    den = cov_tt * cov_pp
    root = math.isqrt(den)
    if root * root == den:
        return cov_tp / root
    return cov_tp / math.sqrt(den)


def metrics(cm: ConfusionMatrix) -> MetricsBundle:
    c = cm.counts.astype(np.float64)
    total = c.sum()
    diag = np.diag(c)
    precision = _safe_div(diag, c.sum(axis=0))
    recall = _safe_div(diag, c.sum(axis=1))
    f1 = _safe_div(2 * precision * recall, precision + recall)
    accuracy = 100.0 * diag.sum() / total if total > 0 else 0.0
    return MetricsBundle(float(accuracy), precision, recall, f1, mcc(cm.counts))


@dataclass
class CVResult:
    per_fold: list[MetricsBundle]
    fold_sizes: list[int]
    pooled: ConfusionMatrix
    predictions: np.ndarray = field(repr=False)

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean([m.accuracy_pct for m in self.per_fold]))

    @property
    def std_accuracy(self) -> float:
        """Population standard deviation of per-fold accuracy."""
        return float(np.std([m.accuracy_pct for m in self.per_fold]))

    @property
    def mean_mcc(self) -> float:
        return float(np.mean([m.mcc for m in self.per_fold]))

    @property
    def pooled_metrics(self) -> MetricsBundle:
        return metrics(self.pooled)

    def summary(self) -> dict:
        return {
            "score_pct": self.mean_accuracy,
            "std_pct": self.std_accuracy,
            "mcc": self.mean_mcc,
        }


def cross_validate(
    frame: FeatureFrame, model_kind: str, k: int = 5, seed: int = 0, threads: int = 1
) -> CVResult:
    """Stratified k-fold train/evaluate rounds on a frame.

    Rows are first put in canonical order so the outcome does not depend on
    the frame's incoming row order. Folds run concurrently when ``threads > 1``
    with identical results.
    """
    order = frame.canonical_order()
    canon = frame.take(order)
    folds = stratified_kfold(canon.label, k, seed)

    def run(f: int) -> np.ndarray:
        test = folds[f]
        train = np.setdiff1d(np.arange(canon.n_rows), test, assume_unique=True)
        model = fit_model(
            model_kind, canon.values[train], canon.label[train],
            derive_seed(seed, "cv", f), canon.features,
        )
        return model.predict_array(canon.values[test])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            preds = list(pool.map(run, range(k)))
    else:
        preds = [run(f) for f in range(k)]

    per_fold, sizes = [], []
    pooled = ConfusionMatrix(np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64))
    predictions = np.empty(canon.n_rows, dtype=np.int64)
    for test, pred in zip(folds, preds):
        cm = confusion(canon.label[test], pred)
        per_fold.append(metrics(cm))
        sizes.append(len(test))
        pooled = pooled + cm
        predictions[order[test]] = pred
    return CVResult(per_fold, sizes, pooled, predictions)
