"""Keyed, counter-based random streams.

Every random decision in detector simulation is drawn from a Philox stream
addressed by (seed, model tag, frame, object, stream).  Identical addresses
give identical draws no matter which policy asks or in which order, which is
what makes scheduling policies comparable draw-for-draw.
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1

# Object slot reserved for clutter (false positive) draws.
CLUTTER_SLOT = _MASK64


def tag_word(tag: str) -> int:
    return zlib.crc32(tag.encode("utf-8"))


def keyed_rng(seed: int, tag: str, frame: int, slot: int, stream: int = 0) -> np.random.Generator:
    """Generator for one (seed, tag, frame, slot, stream) address.

    The low counter word is left at zero so a stream can draw up to 2**64
    blocks before it could run into a neighbouring address.
    """
    key = np.array([seed & _MASK64, tag_word(tag)], dtype=np.uint64)
    counter = np.array([0, frame & _MASK64, slot & _MASK64, stream & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))
