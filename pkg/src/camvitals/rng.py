"""Seeded random number streams.

Every stochastic component (weight init, dropout, shuffling, sensor noise)
draws from a counter-based Philox generator keyed by a user seed plus a
tuple of stream labels. Identical (seed, labels) always yields the identical
sequence, so runs are bit-reproducible and independent streams never alias.
"""
from __future__ import annotations

import numpy as np

# Stream labels are small non-negative ints; named constants keep call
# sites self-describing and the label space collision-free.
STREAM_INIT = 0
STREAM_DROPOUT = 1
STREAM_SHUFFLE = 2
STREAM_FRAME_NOISE = 3
STREAM_MOTION = 4


def stream(seed: int, *labels: int) -> np.random.Generator:
    """Return a fresh Philox generator for the (seed, labels) stream."""
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF,
                                spawn_key=tuple(int(x) for x in labels))
    return np.random.Generator(np.random.Philox(ss))


def derive(seed: int, *labels: int) -> int:
    """Deterministically derive a sub-seed for the (seed, labels) stream."""
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF,
                                spawn_key=tuple(int(x) for x in labels))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
