"""Ledger and label-book parsing.

Ledgers are JSON lines, one transaction per line::

    {"tx": "<id>", "t": <int>, "in": [["<addr>", <sat>], ...], "out": [["<addr>", <sat>], ...]}

A transaction with ``"in": []`` is a coinbase. Label books are CSV files with
the header ``address,entity,class``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import IO, Iterable, Iterator

from .classes import CLASSES
from .errors import (
    ConflictingClass,
    DuplicateAddress,
    DuplicateTxId,
    MalformedRecord,
    NegativeFee,
    NegativeValue,
)

Leg = tuple[str, int]


@dataclass(frozen=True)
class RawTransaction:
    tx_id: str
    timestamp: int
    inputs: tuple[Leg, ...]
    outputs: tuple[Leg, ...]

    @property
    def is_coinbase(self) -> bool:
        return not self.inputs

    @property
    def sort_key(self) -> tuple[int, str]:
        return (self.timestamp, self.tx_id)

    def input_total(self) -> int:
        return sum(v for _, v in self.inputs)

    def output_total(self) -> int:
        return sum(v for _, v in self.outputs)


@dataclass(frozen=True)
class Fee:
    value: int


@dataclass(frozen=True)
class LabelBook:
    """Address -> (entity name, class)."""

    entries: dict[str, tuple[str, str]]

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, address: object) -> bool:
        return address in self.entries

    def get(self, address: str) -> tuple[str, str] | None:
        return self.entries.get(address)

    def entity_classes(self) -> dict[str, str]:
        return {name: cls for name, cls in self.entries.values()}


def compute_fee(tx: RawTransaction) -> Fee:
    if tx.is_coinbase:
        return Fee(0)
    return Fee(tx.input_total() - tx.output_total())


def _parse_legs(raw: object, line_no: int, side: str) -> tuple[Leg, ...]:
    if not isinstance(raw, list):
        raise MalformedRecord(line_no, f"'{side}' must be a list")
    legs = []
    for leg in raw:
        if not (isinstance(leg, list) and len(leg) == 2):
            raise MalformedRecord(line_no, f"'{side}' entries must be [address, value] pairs")
        addr, value = leg
        if not isinstance(addr, str) or not addr:
            raise MalformedRecord(line_no, f"'{side}' address must be a non-empty string")
        # bool is an int subclass; reject it explicitly
        if not isinstance(value, int) or isinstance(value, bool):
            raise MalformedRecord(line_no, f"'{side}' value must be an integer satoshi amount")
        if value < 0:
            raise NegativeValue(f"line {line_no}: negative value {value} for {addr}")
        legs.append((addr, value))
    return tuple(legs)


def parse_record(line: str, line_no: int = 1) -> RawTransaction:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(line_no, f"invalid JSON ({exc.msg})") from None
    if not isinstance(obj, dict):
        raise MalformedRecord(line_no, "record must be a JSON object")
    missing = {"tx", "t", "in", "out"} - obj.keys()
    if missing:
        raise MalformedRecord(line_no, f"missing keys {sorted(missing)}")
    tx_id, ts = obj["tx"], obj["t"]
    if not isinstance(tx_id, str) or not tx_id:
        raise MalformedRecord(line_no, "'tx' must be a non-empty string")
    if not isinstance(ts, int) or isinstance(ts, bool):
        raise MalformedRecord(line_no, "'t' must be an integer timestamp")
    inputs = _parse_legs(obj["in"], line_no, "in")
    outputs = _parse_legs(obj["out"], line_no, "out")
    if not outputs:
        raise MalformedRecord(line_no, "transaction has no outputs")
    tx = RawTransaction(tx_id, ts, inputs, outputs)
    if inputs and tx.input_total() < tx.output_total():
        raise NegativeFee(
            f"line {line_no}: tx {tx_id} spends {tx.output_total()} from {tx.input_total()}"
        )
    return tx


def parse_ledger(stream: Iterable[str]) -> list[RawTransaction]:
    """Parse a JSONL ledger and return transactions sorted by (timestamp, tx_id)."""
    txs: list[RawTransaction] = []
    seen: set[str] = set()
    for line_no, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        tx = parse_record(line, line_no)
        if tx.tx_id in seen:
            raise DuplicateTxId(f"line {line_no}: duplicate tx id {tx.tx_id!r}")
        seen.add(tx.tx_id)
        txs.append(tx)
    txs.sort(key=lambda tx: tx.sort_key)
    return txs


def serialize_record(tx: RawTransaction) -> str:
    return json.dumps(
        {
            "tx": tx.tx_id,
            "t": tx.timestamp,
            "in": [[a, v] for a, v in tx.inputs],
            "out": [[a, v] for a, v in tx.outputs],
        },
        separators=(",", ":"),
    )


def iter_serialized(txs: Iterable[RawTransaction]) -> Iterator[str]:
    for tx in txs:
        yield serialize_record(tx) + "\n"


def write_ledger(txs: Iterable[RawTransaction], fh: IO[str]) -> None:
    fh.writelines(iter_serialized(txs))


def dumps_ledger(txs: Iterable[RawTransaction]) -> str:
    return "".join(iter_serialized(txs))


def load_labels(stream: Iterable[str]) -> LabelBook:
    """Parse an ``address,entity,class`` CSV into a validated LabelBook."""
    reader = csv.reader(stream)
    entries: dict[str, tuple[str, str]] = {}
    entity_class: dict[str, str] = {}
    header_seen = False
    for row_no, row in enumerate(reader, start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        if not header_seen:
            header_seen = True
            if [c.strip() for c in row] == ["address", "entity", "class"]:
                continue
            raise MalformedRecord(row_no, "label CSV header must be 'address,entity,class'")
        if len(row) != 3:
            raise MalformedRecord(row_no, f"expected 3 columns, got {len(row)}")
        address, entity, cls = (c.strip() for c in row)
        if cls not in CLASSES:
            raise MalformedRecord(row_no, f"unknown class {cls!r}")
        if not address or not entity:
            raise MalformedRecord(row_no, "empty address or entity name")
        if address in entries:
            raise DuplicateAddress(f"row {row_no}: address {address!r} listed twice")
        known = entity_class.setdefault(entity, cls)
        if known != cls:
            raise ConflictingClass(f"row {row_no}: entity {entity!r} labeled {known} and {cls}")
        entries[address] = (entity, cls)
    return LabelBook(entries)


def dumps_labels(book: LabelBook) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["address", "entity", "class"])
    for address in sorted(book.entries):
        entity, cls = book.entries[address]
        writer.writerow([address, entity, cls])
    return buf.getvalue()
