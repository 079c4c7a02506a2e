"""The four feature frames: entity, address, 1_motif and 2_motif.

Each row carries its owning entity id and class label. Monetary features are
BTC doubles (satoshis / 1e8); counts and flags are widened to doubles.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .classes import CLASSES, CLASS_INDEX, SATOSHI_PER_BTC
from .clustering import AddressClustering, LabeledEntitySet
from .errors import MalformedRecord
from .graph import AddressTransactionGraph, EntityTransactionGraph
from .motifs import Motif1Record, Motif2Record

NUMERIC = "numeric"
BOOLEAN = "boolean"

ENTITY_SCHEMA: tuple[tuple[str, str], ...] = (
    ("btc_received", NUMERIC),
    ("btc_sent", NUMERIC),
    ("balance", NUMERIC),
    ("n_tx_receiver", NUMERIC),
    ("n_tx_sender", NUMERIC),
    ("n_addr_receiving", NUMERIC),
    ("n_addr_sending", NUMERIC),
)
ADDRESS_SCHEMA: tuple[tuple[str, str], ...] = (
    ("n_tx_receiver", NUMERIC),
    ("n_tx_sender", NUMERIC),
    ("btc_received", NUMERIC),
    ("btc_sent", NUMERIC),
    ("balance", NUMERIC),
    ("uniqueness", BOOLEAN),
    ("siblings", NUMERIC),
)
MOTIF1_SCHEMA: tuple[tuple[str, str], ...] = (
    ("amount_sent", NUMERIC),
    ("amount_received", NUMERIC),
    ("n_addr_sending", NUMERIC),
    ("n_addr_receiving", NUMERIC),
    ("n_similar_sent", NUMERIC),
    ("n_similar_received", NUMERIC),
    ("fee", NUMERIC),
    ("is_direct_loop", BOOLEAN),
)
MOTIF2_SCHEMA: tuple[tuple[str, str], ...] = (
    ("n_addr_in_first", NUMERIC),
    ("n_addr_out_first", NUMERIC),
    ("n_addr_in_second", NUMERIC),
    ("n_addr_out_second", NUMERIC),
    ("amount_sent_first", NUMERIC),
    ("amount_received_first", NUMERIC),
    ("amount_sent_second", NUMERIC),
    ("amount_received_second", NUMERIC),
    ("fee_first", NUMERIC),
    ("fee_second", NUMERIC),
    ("n_similar_sent_first", NUMERIC),
    ("n_similar_sent_second", NUMERIC),
    ("is_loop_first", BOOLEAN),
    ("is_loop_second", BOOLEAN),
    ("is_loop_whole", BOOLEAN),
)
KNOWN_SCHEMAS = {
    "entity": ENTITY_SCHEMA,
    "address": ADDRESS_SCHEMA,
    "motif1": MOTIF1_SCHEMA,
    "motif2": MOTIF2_SCHEMA,
}


@dataclass(frozen=True)
class FeatureFrame:
    """Tabular samples: one row per entity/address/motif.

    ``label`` holds canonical class indices (see ``classes.CLASSES``).
    """

    name: str
    features: tuple[str, ...]
    kinds: tuple[str, ...]
    entity: np.ndarray
    label: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.entity)
        if self.values.shape != (n, len(self.features)):
            raise ValueError(
                f"values shape {self.values.shape} does not match {n} rows x {len(self.features)} features"
            )
        if len(self.label) != n or len(self.kinds) != len(self.features):
            raise ValueError("entity, label and kinds must align with rows and features")

    @property
    def n_rows(self) -> int:
        return len(self.entity)

    @property
    def n_features(self) -> int:
        return len(self.features)

    def take(self, rows: np.ndarray | Sequence[int]) -> "FeatureFrame":
        rows = np.asarray(rows, dtype=np.int64)
        return FeatureFrame(
            self.name, self.features, self.kinds,
            self.entity[rows], self.label[rows], self.values[rows],
        )

    def with_columns(self, names: Sequence[str], block: np.ndarray, name: str | None = None) -> "FeatureFrame":
        block = np.asarray(block, dtype=np.float64).reshape(self.n_rows, len(names))
        return FeatureFrame(
            name or self.name,
            self.features + tuple(names),
            self.kinds + (NUMERIC,) * len(names),
            self.entity,
            self.label,
            np.hstack([self.values, block]),
        )

    def canonical_order(self) -> np.ndarray:
        """Row permutation sorting by (entity, label, values...) lexicographically."""
        if self.n_rows == 0:
            return np.zeros(0, dtype=np.int64)
        keys = [self.values[:, j] for j in range(self.n_features - 1, -1, -1)]
        keys += [self.label, self.entity]
        return np.lexsort(keys)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(("entity_id", "label") + self.features) + "\n")
        for eid, lab, row in zip(self.entity, self.label, self.values):
            buf.write(f"{eid},{CLASSES[lab]},")
            buf.write(",".join("%.17g" % v for v in row))
            buf.write("\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str | Iterable[str], name: str = "frame") -> "FeatureFrame":
        lines = text.splitlines() if isinstance(text, str) else text
        reader = csv.reader(lines)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedRecord(1, "empty frame file") from None
        if header[:2] != ["entity_id", "label"]:
            raise MalformedRecord(1, "frame header must start with entity_id,label")
        features = tuple(header[2:])
        kinds = _kinds_for(name, features)
        ent, lab, vals = [], [], []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise MalformedRecord(line_no, f"expected {len(header)} columns, got {len(row)}")
            try:
                ent.append(int(row[0]))
                lab.append(CLASS_INDEX[row[1]])
                vals.append([float(v) for v in row[2:]])
            except (ValueError, KeyError) as exc:
                raise MalformedRecord(line_no, f"bad value ({exc})") from None
        return cls(
            name,
            features,
            kinds,
            np.asarray(ent, dtype=np.int64),
            np.asarray(lab, dtype=np.int64),
            np.asarray(vals, dtype=np.float64).reshape(len(ent), len(features)),
        )


def _kinds_for(name: str, features: tuple[str, ...]) -> tuple[str, ...]:
    schema = KNOWN_SCHEMAS.get(name)
    if schema is not None and tuple(f for f, _ in schema) == features:
        return tuple(k for _, k in schema)
    return (NUMERIC,) * len(features)


def _frame(name, schema, entity, label, rows) -> FeatureFrame:
    return FeatureFrame(
        name,
        tuple(f for f, _ in schema),
        tuple(k for _, k in schema),
        np.asarray(entity, dtype=np.int64),
        np.asarray(label, dtype=np.int64),
        np.asarray(rows, dtype=np.float64).reshape(len(entity), len(schema)),
    )


def _btc(sat: int) -> float:
    return sat / SATOSHI_PER_BTC


def entity_features(g: EntityTransactionGraph, labels: LabeledEntitySet) -> FeatureFrame:
    """One row per labeled entity, in ascending entity id order."""
    ids = labels.sorted_ids()
    wanted = set(ids)
    received = dict.fromkeys(ids, 0)
    sent = dict.fromkeys(ids, 0)
    n_recv = dict.fromkeys(ids, 0)
    n_send = dict.fromkeys(ids, 0)
    addr_recv: dict[int, set[str]] = {e: set() for e in ids}
    addr_send: dict[int, set[str]] = {e: set() for e in ids}
    for tx in g.txs:
        for e, edge in tx.incoming.items():
            if e in wanted:
                sent[e] += edge.value
                n_send[e] += 1
                addr_send[e].update(edge.addresses)
        for e, edge in tx.outgoing.items():
            if e in wanted:
                received[e] += edge.value
                n_recv[e] += 1
                addr_recv[e].update(edge.addresses)
    rows = [
        (
            _btc(received[e]),
            _btc(sent[e]),
            _btc(received[e] - sent[e]),
            n_recv[e],
            n_send[e],
            len(addr_recv[e]),
            len(addr_send[e]),
        )
        for e in ids
    ]
    lab = [CLASS_INDEX[labels.class_of(e)] for e in ids]
    return _frame("entity", ENTITY_SCHEMA, ids, lab, rows)


def address_features(
    g_addr: AddressTransactionGraph,
    clustering: AddressClustering,
    labels: LabeledEntitySet,
) -> FeatureFrame:
    """One row per address owned by a labeled entity, ordered by (entity, address)."""
    ent, lab, rows = [], [], []
    for eid in labels.sorted_ids():
        cls = CLASS_INDEX[labels.class_of(eid)]
        members = clustering.members[eid]
        siblings = len(members) - 1
        for addr in members:
            recv_tx = g_addr.receives_in.get(addr, [])
            send_tx = g_addr.spends_in.get(addr, [])
            got = sum(g_addr.txs[i].outgoing[addr].value for i in recv_tx)
            gave = sum(g_addr.txs[i].incoming[addr].value for i in send_tx)
            n_distinct = len(set(recv_tx) | set(send_tx))
            ent.append(eid)
            lab.append(cls)
            rows.append(
                (
                    len(recv_tx),
                    len(send_tx),
                    _btc(got),
                    _btc(gave),
                    _btc(got - gave),
                    1 if n_distinct == 1 else 0,
                    siblings,
                )
            )
    return _frame("address", ADDRESS_SCHEMA, ent, lab, rows)


def motif1_features(
    records: Iterable[Motif1Record],
    pair_index: Mapping[tuple[int, int], int],
    labels: LabeledEntitySet,
) -> FeatureFrame:
    """One row per 1_motif whose spender is labeled; owner is the spender."""
    ent, lab, rows = [], [], []
    for r in records:
        b = r.branch
        if b.e_in not in labels:
            continue
        ent.append(b.e_in)
        lab.append(CLASS_INDEX[labels.class_of(b.e_in)])
        rows.append(
            (
                _btc(b.value_in),
                _btc(b.value_out),
                b.addr_in_count,
                b.addr_out_count,
                pair_index.get((b.e_in, b.e_out), 0),
                pair_index.get((b.e_out, b.e_in), 0),
                _btc(b.fee),
                1 if b.is_direct_loop else 0,
            )
        )
    return _frame("motif1", MOTIF1_SCHEMA, ent, lab, rows)


def motif2_features(
    records: Iterable[Motif2Record],
    pair_index: Mapping[tuple[int, int], int],
    labels: LabeledEntitySet,
) -> FeatureFrame:
    """One row per 2_motif whose first spender is labeled; owner is that spender."""
    ent, lab, rows = [], [], []
    for r in records:
        f, s = r.first, r.second
        if f.e_in not in labels:
            continue
        ent.append(f.e_in)
        lab.append(CLASS_INDEX[labels.class_of(f.e_in)])
        rows.append(
            (
                f.addr_in_count,
                f.addr_out_count,
                s.addr_in_count,
                s.addr_out_count,
                _btc(f.value_in),
                _btc(f.value_out),
                _btc(s.value_in),
                _btc(s.value_out),
                _btc(f.fee),
                _btc(s.fee),
                pair_index.get((f.e_in, f.e_out), 0),
                pair_index.get((s.e_in, s.e_out), 0),
                1 if f.is_direct_loop else 0,
                1 if s.is_direct_loop else 0,
                1 if r.whole_is_loop else 0,
            )
        )
    return _frame("motif2", MOTIF2_SCHEMA, ent, lab, rows)
