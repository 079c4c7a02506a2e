"""Address-transaction and entity-transaction bipartite graphs.

Both graphs share one shape: transaction vertices in ledger order, each with
incoming edges (vertex -> tx, value spent) and outgoing edges (tx -> vertex,
value received). Every edge carries the set of concrete addresses behind it,
which for the address graph is just the vertex itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Generic, Hashable, Iterator, Sequence, TypeVar

from .clustering import AddressClustering
from .errors import UnknownAddress
from .ingest import RawTransaction, compute_fee

V = TypeVar("V", bound=Hashable)


@dataclass(frozen=True)
class Edge:
    value: int
    addresses: frozenset[str]


@dataclass(frozen=True)
class TxVertex(Generic[V]):
    index: int
    tx_id: str
    timestamp: int
    fee: int
    incoming: dict[V, Edge]
    outgoing: dict[V, Edge]

    @property
    def sort_key(self) -> tuple[int, str]:
        return (self.timestamp, self.tx_id)


@dataclass
class _Bipartite(Generic[V]):
    txs: list[TxVertex[V]]
    # vertex -> tx indices where it spends / receives, ascending
    spends_in: dict[V, list[int]] = field(default_factory=dict)
    receives_in: dict[V, list[int]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for tx in self.txs:
            for v in tx.incoming:
                self.spends_in.setdefault(v, []).append(tx.index)
            for v in tx.outgoing:
                self.receives_in.setdefault(v, []).append(tx.index)

    @property
    def vertices(self) -> list[V]:
        return sorted(self.spends_in.keys() | self.receives_in.keys())

    @property
    def n_edges(self) -> int:
        return sum(len(tx.incoming) + len(tx.outgoing) for tx in self.txs)

    def edges(self) -> Iterator[tuple[str, V, str, Edge]]:
        """Yield (direction, vertex, tx_id, edge) with direction 'in' or 'out'."""
        for tx in self.txs:
            for v, e in tx.incoming.items():
                yield "in", v, tx.tx_id, e
            for v, e in tx.outgoing.items():
                yield "out", v, tx.tx_id, e

    def to_csv(self) -> str:
        lines = ["direction,vertex,tx_id,value,n_addresses"]
        for direction, v, tx_id, e in self.edges():
            lines.append(f"{direction},{v},{tx_id},{e.value},{len(e.addresses)}")
        return "\n".join(lines) + "\n"


class AddressTransactionGraph(_Bipartite[str]):
    pass


class EntityTransactionGraph(_Bipartite[int]):
    pass


def _aggregate(legs, key_of) -> dict:
    values: dict = {}
    addrs: dict = {}
    for addr, value in legs:
        k = key_of(addr)
        values[k] = values.get(k, 0) + value
        addrs.setdefault(k, set()).add(addr)
    return {k: Edge(values[k], frozenset(addrs[k])) for k in sorted(values)}


def _build(txs: Sequence[RawTransaction], key_of) -> list[TxVertex]:
    ordered = sorted(txs, key=lambda tx: tx.sort_key)
    return [
        TxVertex(
            index=i,
            tx_id=tx.tx_id,
            timestamp=tx.timestamp,
            fee=compute_fee(tx).value,
            incoming=_aggregate(tx.inputs, key_of),
            outgoing=_aggregate(tx.outputs, key_of),
        )
        for i, tx in enumerate(ordered)
    ]


def build_address_graph(txs: Sequence[RawTransaction]) -> AddressTransactionGraph:
    return AddressTransactionGraph(_build(txs, lambda a: a))


def build_entity_graph(
    txs: Sequence[RawTransaction], clustering: AddressClustering
) -> EntityTransactionGraph:
    """Collapse address edges onto entities, summing values and uniting address sets."""
    entity_of = clustering.entity_of

    def key_of(addr: str) -> int:
        try:
            return entity_of[addr]
        except KeyError:
            raise UnknownAddress(f"address {addr!r} is not covered by the clustering") from None

    return EntityTransactionGraph(_build(txs, key_of))
