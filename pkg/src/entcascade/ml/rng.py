"""Seed derivation.

Every random stream is keyed by the master seed plus a path of labels (for
example ``(seed, "rf", 3, "bootstrap")``). The path is hashed into a
``SeedSequence`` spawn key, so derived seeds depend only on the path and never
on call order or thread scheduling.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key(part: object) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part)
    return zlib.crc32(str(part).encode("utf-8"))


def derive_seed(seed: int, *path: object) -> int:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key(p) for p in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def generator(seed: int, *path: object) -> np.random.Generator:
    """Philox generator for the stream at ``path``."""
    return np.random.Generator(np.random.Philox(derive_seed(seed, *path)))
