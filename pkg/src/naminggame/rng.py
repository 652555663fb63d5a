"""Per-replicate random streams.

Every replicate gets its own counter-based generator (Philox) whose key is
derived from ``(master seed, *stream, replicate index)`` through
:class:`numpy.random.SeedSequence`.  The derived integer seed is what gets
written into output rows, so any single replicate can be re-run in isolation
with ``make_rng(row_seed)``.
"""

from __future__ import annotations

import numpy as np


def replicate_seed(master: int, replicate: int, stream: tuple[int, ...] = ()) -> int:
    """Derive the 64-bit seed of one replicate."""
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=tuple(int(s) for s in stream) + (int(replicate),))
    return int(ss.generate_state(1, np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


def replicate_rng(master: int, replicate: int, stream: tuple[int, ...] = ()) -> tuple[int, np.random.Generator]:
    seed = replicate_seed(master, replicate, stream)
    return seed, make_rng(seed)
