"""Seeded, counter-based random streams.

Every stream is a Philox generator keyed by a SHA-256 digest of the user
seed and a tuple of labels, so independent substreams (per worker, per
chunk, per purpose) are derived without coordination and replay exactly.
"""

from __future__ import annotations

import hashlib

import numpy as np

RNG_ALGORITHM = "philox4x64/sha256-key/v1"


def stream_key(seed: int, *labels) -> int:
    text = "|".join([str(int(seed)), *map(str, labels)])
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:16], "little")


def make_rng(seed: int, *labels) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=stream_key(seed, *labels)))
