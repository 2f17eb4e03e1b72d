"""Named random streams derived from a single root seed.

Every consumer asks for a stream by name (``"worker", 3`` or
``"chain", 0, "noise"``) so that adding a new consumer never shifts the
numbers seen by an existing one.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFF
    return zlib.crc32(str(part).encode("utf-8"))


def stream(root_seed: int, *names) -> np.random.Generator:
    """Return an independent generator for ``names`` under ``root_seed``."""
    ss = np.random.SeedSequence(int(root_seed), spawn_key=tuple(_key(n) for n in names))
    return np.random.Generator(np.random.PCG64(ss))
