"""Labelled, reproducible random substreams.

Every random draw in the package comes from ``substream(seed, *labels)``:
a PCG64 generator keyed by the master seed and a tuple of labels, so adding
a new consumer never perturbs existing streams.
"""
from __future__ import annotations

import zlib

import numpy as np

STREAM_VERSION = 1


def _label_key(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label) & 0xFFFFFFFF
    return zlib.crc32(str(label).encode("utf-8"))


def substream(seed: int, *labels) -> np.random.Generator:
    key = (STREAM_VERSION,) + tuple(_label_key(x) for x in labels)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *labels) -> int:
    """A 63-bit integer seed derived from ``seed`` and ``labels``."""
    return int(substream(seed, "derive", *labels).integers(0, 2**63 - 1))
