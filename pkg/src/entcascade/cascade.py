"""Baseline and cascading entity-classification experiments.

The cascade trains one first-level classifier per source frame (address,
1_motif, 2_motif) on a stratified 70% A-split, predicts the 30% B-split, and
turns each entity's B-set predictions into six class percentages. The three
percentage blocks extend the seven entity features to a 25-column frame on
which the final classifier is cross-validated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .classes import CLASSES, N_CLASSES
from .errors import ClassTooSmall, UnknownEntity
from .evaluation import CVResult, cross_validate
from .features import FeatureFrame
from .ml.ensemble import MODEL_NAMES, RANDOM_FOREST, feature_importance, fit_frame
from .ml.rng import derive_seed, generator

SOURCES = ("address", "motif1", "motif2")
A_FRACTION_TENTHS = 7
K_FOLDS = 5
TOP_IMPORTANCES = 15

# Published full-chain results, carried as metadata only.
REFERENCE = {
    "baseline": {
        "adaboost": {"score_pct": 45.63, "std_pct": 6.34, "mcc": 0.22},
        "rf": {"score_pct": 59.71, "std_pct": 1.82, "mcc": 0.41},
        "gb": {"score_pct": 61.90, "std_pct": 1.36, "mcc": 0.44},
    },
    "cascade": {
        "adaboost": {"score_pct": 78.84, "std_pct": 1.76, "mcc": 0.76},
        "rf": {"score_pct": 98.04, "std_pct": 1.22, "mcc": 0.97},
        "gb": {"score_pct": 99.68, "std_pct": 0.63, "mcc": 0.99},
    },
    "first_level": {
        "adaboost": {"address": 61.54, "motif1": 72.69, "motif2": 78.27},
        "rf": {"address": 95.73, "motif1": 94.14, "motif2": 90.88},
        "gb": {"address": 83.23, "motif1": 83.52, "motif2": 83.54},
    },
}


@dataclass(frozen=True)
class AbSplit:
    """Row indices (into the original frame) of the A (train) and B (predict) parts."""

    a_rows: np.ndarray
    b_rows: np.ndarray


@dataclass(frozen=True)
class EnrichmentBlock:
    """Per-entity class percentages, rows aligned with ``entity``."""

    source: str
    entity: np.ndarray
    pct: np.ndarray

    @property
    def columns(self) -> tuple[str, ...]:
        return tuple(f"{self.source}_pct_{c}" for c in CLASSES)


def split_ab(frame: FeatureFrame, seed: int) -> AbSplit:
    """Stratified 70/30 split; each class contributes round(0.7 n) rows to A."""
    order = frame.canonical_order()
    labels = frame.label[order]
    present, counts = np.unique(labels, return_counts=True)
    for cls, cnt in zip(present, counts):
        if cnt < 2:
            raise ClassTooSmall(f"class {CLASSES[cls]} has {cnt} row(s) in frame {frame.name!r}; need 2")
    rng = generator(seed, "ab", frame.name)
    a_parts, b_parts = [], []
    for cls in present:
        members = order[labels == cls]
        members = members[rng.permutation(len(members))]
        n_a = (A_FRACTION_TENTHS * len(members) + 5) // 10
        a_parts.append(members[:n_a])
        b_parts.append(members[n_a:])
    a = np.sort(np.concatenate(a_parts)) if a_parts else np.zeros(0, np.int64)
    b = np.sort(np.concatenate(b_parts)) if b_parts else np.zeros(0, np.int64)
    return AbSplit(a.astype(np.int64), b.astype(np.int64))


def enrich(
    entity_frame: FeatureFrame,
    owners: Sequence[int],
    predicted: Sequence[int],
    source: str = "source",
) -> EnrichmentBlock:
    """Percentage of each entity's predictions falling in each class.

    Entities with no predictions get an all-zero block.
    """
    entities = entity_frame.entity
    pos = {int(e): i for i, e in enumerate(entities)}
    counts = np.zeros((len(entities), N_CLASSES))
    for owner, cls in zip(owners, predicted):
        i = pos.get(int(owner))
        if i is None:
            raise UnknownEntity(f"prediction owned by entity {owner}, absent from the entity frame")
        counts[i, int(cls)] += 1
    totals = counts.sum(axis=1, keepdims=True)
    pct = np.zeros_like(counts)
    np.divide(100.0 * counts, totals, out=pct, where=totals > 0)
    return EnrichmentBlock(source, entities.copy(), pct)


@dataclass
class FirstLevel:
    source: str
    model_kind: str
    split: AbSplit
    cv: CVResult
    block: EnrichmentBlock


@dataclass
class EvaluationReport:
    experiment: str
    model: str
    seed: int
    cv: CVResult
    n_features: int
    first_level_model: str | None = None
    first_level: dict[str, FirstLevel] = field(default_factory=dict)
    importances: list[tuple[str, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        pooled = self.cv.pooled_metrics
        support = self.cv.pooled.counts.sum(axis=1)
        d = {
            "experiment": self.experiment,
            "model": self.model,
            "model_name": MODEL_NAMES[self.model],
            "classifier": "C_final" if self.experiment == "cascade" else "C_entity",
            "first_level_model": self.first_level_model,
            "seed": self.seed,
            "k": len(self.cv.per_fold),
            "n_samples": int(sum(self.cv.fold_sizes)),
            "n_features": self.n_features,
            "per_fold": [
                {"fold": i, "n_test": n, "score_pct": m.accuracy_pct, "mcc": m.mcc}
                for i, (n, m) in enumerate(zip(self.cv.fold_sizes, self.cv.per_fold))
            ],
            "averages": self.cv.summary(),
            "per_class_basis": "pooled confusion matrix across folds",
            "per_class": {
                name: {
                    "precision": float(pooled.precision[i]),
                    "recall": float(pooled.recall[i]),
                    "f1": float(pooled.f1[i]),
                    "support": int(support[i]),
                }
                for i, name in enumerate(CLASSES)
            },
            "confusion": self.cv.pooled.counts.tolist(),
            "first_level_cv": {
                src: dict(
                    fl.cv.summary(),
                    model=fl.model_kind,
                    n_a=int(len(fl.split.a_rows)),
                    n_b=int(len(fl.split.b_rows)),
                )
                for src, fl in self.first_level.items()
            },
            "importances": [{"feature": f, "score": s} for f, s in self.importances],
            "reference": _reference(self.experiment, self.model, self.first_level_model),
        }
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _reference(experiment: str, model: str, first_level_model: str | None) -> dict:
    ref = {"note": "published full-blockchain results; not reproducible on synthetic ledgers"}
    ref.update(REFERENCE[experiment][model])
    if first_level_model is not None:
        ref["first_level_pct"] = REFERENCE["first_level"][first_level_model]
    return ref


def _ranked_importances(kind: str, frame: FeatureFrame, seed: int, threads: int) -> list[tuple[str, float]]:
    model = fit_frame(kind, frame, derive_seed(seed, "importance", kind), threads)
    return feature_importance(model)


def run_baseline(
    entity_frame: FeatureFrame, model_kind: str, seed: int, threads: int = 1
) -> EvaluationReport:
    """C_entity: stratified 5-fold CV on the raw entity features."""
    cv = cross_validate(entity_frame, model_kind, K_FOLDS, seed, threads)
    return EvaluationReport(
        "baseline", model_kind, seed, cv, entity_frame.n_features,
        importances=_ranked_importances(model_kind, entity_frame, seed, threads),
    )


def first_level(
    entity_frame: FeatureFrame,
    source_frame: FeatureFrame,
    source: str,
    model_kind: str,
    seed: int,
    threads: int = 1,
) -> FirstLevel:
    """A/B split, CV on A, fit on A, predict B, and enrich by owning entity."""
    split = split_ab(source_frame, derive_seed(seed, "split", source))
    a = source_frame.take(split.a_rows)
    b = source_frame.take(split.b_rows)
    cv = cross_validate(a, model_kind, K_FOLDS, derive_seed(seed, "first_level_cv", source), threads)
    model = fit_frame(model_kind, a, derive_seed(seed, "first_level", source), threads)
    predicted = model.predict_array(b.values) if b.n_rows else np.zeros(0, np.int64)
    block = enrich(entity_frame, b.entity, predicted, source)
    return FirstLevel(source, model_kind, split, cv, block)


def enriched_frame(entity_frame: FeatureFrame, blocks: Sequence[EnrichmentBlock]) -> FeatureFrame:
    frame = entity_frame
    for block in blocks:
        if not np.array_equal(block.entity, entity_frame.entity):
            raise ValueError(f"enrichment block {block.source!r} is not aligned with the entity frame")
        frame = frame.with_columns(block.columns, block.pct, name="enriched")
    return frame


def build_first_level(
    entity_frame: FeatureFrame,
    sources: Mapping[str, FeatureFrame],
    model_kind: str = RANDOM_FOREST,
    seed: int = 0,
    threads: int = 1,
) -> dict[str, FirstLevel]:
    return {
        name: first_level(entity_frame, sources[name], name, model_kind, seed, threads)
        for name in SOURCES
    }


def run_cascade(
    entity_frame: FeatureFrame,
    address_frame: FeatureFrame,
    motif1_frame: FeatureFrame,
    motif2_frame: FeatureFrame,
    first_level_model_kind: str = RANDOM_FOREST,
    final_model_kind: str = "gb",
    seed: int = 0,
    threads: int = 1,
    first: Mapping[str, FirstLevel] | None = None,
) -> EvaluationReport:
    """C_final: cross-validate the final model on the 25-feature enriched frame.

    ``first`` may carry first-level results from an earlier call with the same
    frames, seed and first-level model, to share them across final models.
    """
    if first is None:
        sources = {"address": address_frame, "motif1": motif1_frame, "motif2": motif2_frame}
        first = build_first_level(entity_frame, sources, first_level_model_kind, seed, threads)
    frame = enriched_frame(entity_frame, [first[s].block for s in SOURCES])
    cv = cross_validate(frame, final_model_kind, K_FOLDS, seed, threads)
    return EvaluationReport(
        "cascade", final_model_kind, seed, cv, frame.n_features,
        first_level_model=first_level_model_kind,
        first_level=dict(first),
        importances=_ranked_importances(final_model_kind, frame, seed, threads),
    )


def render_tables(reports: Sequence[EvaluationReport | Mapping]) -> str:
    """Plain-text comparison tables: overall scores, first-level CV, per-class, importances.

    Accepts reports or their ``to_dict`` form, so saved report JSON re-renders identically.
    """
    ds = [r.to_dict() if isinstance(r, EvaluationReport) else r for r in reports]
    out = ["Model               Classifier  Score %   Std %    MCC"]
    for d in ds:
        s = d["averages"]
        out.append(
            f"{d['model_name']:<19} {d['classifier']:<10} {s['score_pct']:>8.2f} {s['std_pct']:>7.2f} {s['mcc']:>6.2f}"
        )
    cascades = [d for d in ds if d["first_level_cv"]]
    if cascades:
        out += ["", "First-level model   C_address %  C_motif1 %  C_motif2 %"]
        seen = set()
        for d in cascades:
            if d["first_level_model"] in seen:
                continue
            seen.add(d["first_level_model"])
            acc = [d["first_level_cv"][src]["score_pct"] for src in SOURCES]
            out.append(
                f"{MODEL_NAMES[d['first_level_model']]:<19} {acc[0]:>11.2f} {acc[1]:>11.2f} {acc[2]:>11.2f}"
            )
    out += ["", "Class        Model               Classifier  Precision  Recall    F1"]
    for d in ds:
        for name in CLASSES:
            m = d["per_class"][name]
            out.append(
                f"{name:<12} {d['model_name']:<19} {d['classifier']:<10} "
                f"{m['precision']:>9.2f} {m['recall']:>7.2f} {m['f1']:>5.2f}"
            )
    for d in ds:
        if not d["importances"]:
            continue
        out += ["", f"Top {TOP_IMPORTANCES} features, {d['model_name']} {d['classifier']}"]
        for rank, item in enumerate(d["importances"][:TOP_IMPORTANCES], start=1):
            out.append(f"{rank:>3}. {item['feature']:<28} {item['score']:.4f}")
    return "\n".join(out) + "\n"
