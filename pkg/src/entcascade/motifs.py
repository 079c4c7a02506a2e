"""1_motif and 2_motif enumeration over an entity-transaction graph.

A branch is an entity -> transaction -> entity path. A 2_motif chains two
branches through a middle entity, with the first transaction strictly earlier
than the second and at least one output address of the first spent as an
input of the second.
"""

from __future__ import annotations

import enum
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Collection, Iterable

from .graph import EntityTransactionGraph, TxVertex

log = logging.getLogger(__name__)


class BranchKind(enum.Enum):
    DIRECT_LOOP = "DirectLoop"
    DIRECT_DISTINCT = "DirectDistinct"


@dataclass(frozen=True, slots=True)
class Branch:
    e_in: int
    tx: str
    e_out: int
    timestamp: int
    value_in: int
    value_out: int
    addr_in_count: int
    addr_out_count: int
    fee: int

    @property
    def is_direct_loop(self) -> bool:
        return self.e_in == self.e_out

    @property
    def sort_key(self) -> tuple[int, str, int, int]:
        return (self.timestamp, self.tx, self.e_in, self.e_out)


@dataclass(frozen=True, slots=True)
class Motif1Record:
    branch: Branch


@dataclass(frozen=True, slots=True)
class Motif2Record:
    first: Branch
    second: Branch

    @property
    def whole_is_loop(self) -> bool:
        return self.first.e_in == self.second.e_out

    @property
    def sort_key(self) -> tuple:
        return self.first.sort_key + self.second.sort_key


def classify_branch(b: Branch) -> BranchKind:
    return BranchKind.DIRECT_LOOP if b.e_in == b.e_out else BranchKind.DIRECT_DISTINCT


def _branch(tx: TxVertex, e_in: int, e_out: int) -> Branch:
    ein, eout = tx.incoming[e_in], tx.outgoing[e_out]
    return Branch(
        e_in=e_in,
        tx=tx.tx_id,
        e_out=e_out,
        timestamp=tx.timestamp,
        value_in=ein.value,
        value_out=eout.value,
        addr_in_count=len(ein.addresses),
        addr_out_count=len(eout.addresses),
        fee=tx.fee,
    )


def extract_1motifs(
    g: EntityTransactionGraph, owners: Collection[int] | None = None
) -> list[Motif1Record]:
    """One record per (spending entity, tx, receiving entity), loops included.

    ``owners`` optionally restricts output to branches whose spender is in the
    collection. Order: (timestamp, tx_id, e_in, e_out).
    """
    out = []
    for tx in g.txs:
        for e_in in tx.incoming:
            if owners is not None and e_in not in owners:
                continue
            for e_out in tx.outgoing:
                out.append(Motif1Record(_branch(tx, e_in, e_out)))
    return out


def build_pair_index(records: Iterable[Motif1Record]) -> Counter:
    """Number of transactions linking each ordered (e_in, e_out) pair."""
    return Counter((r.branch.e_in, r.branch.e_out) for r in records)


def pair_index_from_graph(g: EntityTransactionGraph) -> Counter:
    counts: Counter = Counter()
    for tx in g.txs:
        for e_in in tx.incoming:
            for e_out in tx.outgoing:
                counts[(e_in, e_out)] += 1
    return counts


def extract_2motifs(
    g: EntityTransactionGraph,
    owners: Collection[int] | None = None,
    max_per_entity: int | None = None,
) -> list[Motif2Record]:
    """Enumerate chained branch pairs (b1, b2) through a shared middle entity.

    Constraints: b1.e_out == b2.e_in, timestamp(b1.tx) < timestamp(b2.tx)
    strictly, and some output address of b1.tx is an input address of b2.tx.
    Candidate first transactions are found by walking, for each input address
    of the second transaction, the earlier transactions that paid it; cost is
    quadratic in per-address reuse. ``max_per_entity`` caps records per middle
    entity and logs a warning when hit. Order: first branch key, then second.
    """
    txs = g.txs
    paid_in: dict[str, list[int]] = {}
    for tx in txs:
        for edge in tx.outgoing.values():
            for addr in edge.addresses:
                paid_in.setdefault(addr, []).append(tx.index)

    branches: dict[tuple[int, int, int], Branch] = {}

    def branch(tx: TxVertex, e_in: int, e_out: int) -> Branch:
        key = (tx.index, e_in, e_out)
        b = branches.get(key)
        if b is None:
            b = branches[key] = _branch(tx, e_in, e_out)
        return b

    per_middle: Counter = Counter()
    capped: set[int] = set()
    out: list[Motif2Record] = []
    for tx2 in txs:
        if not tx2.incoming:
            continue
        firsts: set[int] = set()
        for edge in tx2.incoming.values():
            for addr in edge.addresses:
                for i in paid_in.get(addr, ()):
                    if i >= tx2.index:
                        break
                    if txs[i].timestamp < tx2.timestamp:
                        firsts.add(i)
        for i in sorted(firsts):
            tx1 = txs[i]
            if not tx1.incoming:
                continue
            starts = [e for e in tx1.incoming if owners is None or e in owners]
            if not starts:
                continue
            for mid in sorted(tx1.outgoing.keys() & tx2.incoming.keys()):
                if mid in capped:
                    continue
                for e_in in starts:
                    b1 = branch(tx1, e_in, mid)
                    for e_out in tx2.outgoing:
                        if max_per_entity is not None and per_middle[mid] >= max_per_entity:
                            capped.add(mid)
                            log.warning(
                                "2_motif cap of %d reached for middle entity %d; "
                                "further records through it are dropped",
                                max_per_entity,
                                mid,
                            )
                            break
                        per_middle[mid] += 1
                        out.append(Motif2Record(b1, branch(tx2, mid, e_out)))
                    if mid in capped:
                        break
    out.sort(key=lambda r: r.sort_key)
    return out


def motif1_csv(records: Iterable[Motif1Record]) -> str:
    lines = ["e_in,tx,e_out,timestamp,value_in,value_out,addr_in_count,addr_out_count,fee,is_direct_loop"]
    for r in records:
        b = r.branch
        lines.append(
            f"{b.e_in},{b.tx},{b.e_out},{b.timestamp},{b.value_in},{b.value_out},"
            f"{b.addr_in_count},{b.addr_out_count},{b.fee},{int(b.is_direct_loop)}"
        )
    return "\n".join(lines) + "\n"


def motif2_csv(records: Iterable[Motif2Record]) -> str:
    lines = ["e_in,tx_first,e_mid,tx_second,e_out,whole_is_loop"]
    for r in records:
        lines.append(
            f"{r.first.e_in},{r.first.tx},{r.first.e_out},{r.second.tx},"
            f"{r.second.e_out},{int(r.whole_is_loop)}"
        )
    return "\n".join(lines) + "\n"
