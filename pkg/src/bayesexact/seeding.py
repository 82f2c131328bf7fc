"""Deterministic random streams.

Every stream is keyed by a master seed plus a path of nonnegative integers
(a point index, a block index, the cells of a table...).  Keys are hashed
with ``SeedSequence`` and feed a counter-based Philox generator, so a
result depends only on its key, never on which worker produced it.
"""

from __future__ import annotations

import numpy as np

# stream tags
NULL_TABLES = 1
PROPOSALS = 2
RESAMPLE = 3
REFERENCE = 4
TABLE_CONTENT = 5
GAUSSIAN = 6


def derive_seed(seed: int, *keys: int) -> int:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0])


def generator(seed: int, *keys: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def table_seed(seed: int, counts) -> int:
    """Seed keyed by a table's contents, so equal tables share a stream."""
    flat = np.asarray(counts).ravel()
    return derive_seed(seed, TABLE_CONTENT, flat.size, *flat.tolist())
