"""The six entity classes, in canonical order."""

from __future__ import annotations

CLASSES: tuple[str, ...] = (
    "Exchange",
    "Gambling",
    "Marketplace",
    "MiningPool",
    "Mixer",
    "Service",
)
N_CLASSES = len(CLASSES)
CLASS_INDEX: dict[str, int] = {name: i for i, name in enumerate(CLASSES)}

SATOSHI_PER_BTC = 100_000_000


def class_index(name: str) -> int:
    try:
        return CLASS_INDEX[name]
    except KeyError:
        raise ValueError(f"unknown class {name!r}; expected one of {', '.join(CLASSES)}") from None
