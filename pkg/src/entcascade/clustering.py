"""Address clustering with the common-input-ownership heuristic."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable

from .errors import InconsistentEntityLabel
from .ingest import LabelBook, RawTransaction

log = logging.getLogger(__name__)


class UnionFind:
    """Disjoint sets over string keys, path halving plus union by size."""

    def __init__(self) -> None:
        self._parent: dict[str, str] = {}
        self._size: dict[str, int] = {}

    def add(self, x: str) -> None:
        if x not in self._parent:
            self._parent[x] = x
            self._size[x] = 1

    def find(self, x: str) -> str:
        parent = self._parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, x: str, y: str) -> None:
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return
        if self._size[rx] < self._size[ry]:
            rx, ry = ry, rx
        self._parent[ry] = rx
        self._size[rx] += self._size[ry]

    def groups(self) -> list[list[str]]:
        out: dict[str, list[str]] = {}
        for x in self._parent:
            out.setdefault(self.find(x), []).append(x)
        return list(out.values())


@dataclass(frozen=True)
class AddressClustering:
    entity_of: dict[str, int]
    members: tuple[tuple[str, ...], ...]

    @property
    def n_entities(self) -> int:
        return len(self.members)

    def size(self, entity_id: int) -> int:
        return len(self.members[entity_id])

    def to_csv(self) -> str:
        lines = ["entity_id,address"]
        for eid, addrs in enumerate(self.members):
            lines.extend(f"{eid},{a}" for a in addrs)
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class LabeledEntitySet:
    labels: dict[int, tuple[str, str]]
    discarded: frozenset[int]

    def class_of(self, entity_id: int) -> str:
        return self.labels[entity_id][1]

    def __contains__(self, entity_id: object) -> bool:
        return entity_id in self.labels

    def sorted_ids(self) -> list[int]:
        return sorted(self.labels)


def cluster_addresses(txs: Iterable[RawTransaction]) -> AddressClustering:
    """Union every non-coinbase transaction's input addresses.

    Addresses seen only as outputs become singletons. Entity ids are dense and
    assigned in order of each cluster's lexicographically smallest address.
    """
    uf = UnionFind()
    for tx in txs:
        first = None
        for addr, _ in tx.inputs:
            uf.add(addr)
            if first is None:
                first = addr
            else:
                uf.union(first, addr)
        for addr, _ in tx.outputs:
            uf.add(addr)
    groups = sorted(tuple(sorted(g)) for g in uf.groups())
    entity_of = {a: eid for eid, group in enumerate(groups) for a in group}
    return AddressClustering(entity_of, tuple(groups))


def label_entities(clustering: AddressClustering, labels: LabelBook) -> LabeledEntitySet:
    """Attach label-book ground truth to clusters; unlabeled clusters are discarded.

    A cluster whose labeled addresses disagree on class raises
    InconsistentEntityLabel. Same-class name disagreements keep the
    lexicographically smallest name.
    """
    found: dict[int, dict[str, str]] = {}
    unknown = 0
    for addr, (name, cls) in labels.entries.items():
        eid = clustering.entity_of.get(addr)
        if eid is None:
            unknown += 1
            continue
        found.setdefault(eid, {})[name] = cls
    if unknown:
        log.warning("%d labeled addresses never appear in the ledger; ignored", unknown)
    out: dict[int, tuple[str, str]] = {}
    for eid, names in found.items():
        classes = set(names.values())
        if len(classes) > 1:
            detail = ", ".join(f"{n}={c}" for n, c in sorted(names.items()))
            raise InconsistentEntityLabel(f"entity {eid} spans conflicting labels: {detail}")
        name = min(names)
        if len(names) > 1:
            log.warning("entity %d spans label entities %s; using %r", eid, sorted(names), name)
        out[eid] = (name, names[name])
    discarded = frozenset(range(clustering.n_entities)) - out.keys()
    return LabeledEntitySet(out, discarded)

