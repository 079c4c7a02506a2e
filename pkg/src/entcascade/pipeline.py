"""Ledger + label book -> the four feature frames."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Sequence

from .clustering import AddressClustering, LabeledEntitySet, cluster_addresses, label_entities
from .features import (
    FeatureFrame,
    address_features,
    entity_features,
    motif1_features,
    motif2_features,
)
from .graph import build_address_graph, build_entity_graph
from .ingest import LabelBook, RawTransaction
from .motifs import extract_1motifs, extract_2motifs, pair_index_from_graph

log = logging.getLogger(__name__)

FRAME_NAMES = ("entity", "address", "motif1", "motif2")


@dataclass
class Frames:
    entity: FeatureFrame
    address: FeatureFrame
    motif1: FeatureFrame
    motif2: FeatureFrame
    clustering: AddressClustering
    labeled: LabeledEntitySet

    def as_dict(self) -> dict[str, FeatureFrame]:
        return {name: getattr(self, name) for name in FRAME_NAMES}


def featurize(
    txs: Sequence[RawTransaction], labels: LabelBook, max_motifs_per_entity: int | None = None
) -> Frames:
    t0 = time.perf_counter()
    clustering = cluster_addresses(txs)
    labeled = label_entities(clustering, labels)
    log.info(
        "clustered %d addresses into %d entities (%d labeled)",
        len(clustering.entity_of), clustering.n_entities, len(labeled.labels),
    )
    g_addr = build_address_graph(txs)
    g = build_entity_graph(txs, clustering)
    owners = frozenset(labeled.labels)
    pairs = pair_index_from_graph(g)
    m1 = extract_1motifs(g, owners=owners)
    m2 = extract_2motifs(g, owners=owners, max_per_entity=max_motifs_per_entity)
    frames = Frames(
        entity=entity_features(g, labeled),
        address=address_features(g_addr, clustering, labeled),
        motif1=motif1_features(m1, pairs, labeled),
        motif2=motif2_features(m2, pairs, labeled),
        clustering=clustering,
        labeled=labeled,
    )
    for name, frame in frames.as_dict().items():
        log.info("%s frame: %d rows x %d features", name, frame.n_rows, frame.n_features)
    log.info("featurized in %.1fs", time.perf_counter() - t0)
    return frames
