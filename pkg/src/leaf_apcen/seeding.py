"""Named random sub-streams derived from a single integer seed."""

import hashlib

import numpy as np


def derive_seed(seed: int, *purpose) -> int:
    """64-bit seed from ``seed`` and a purpose path, e.g. ``("corpus", "clip", 17)``."""
    h = hashlib.blake2b(digest_size=8)
    h.update((int(seed) & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little"))
    for part in purpose:
        h.update(b"\x00" + str(part).encode())
    return int.from_bytes(h.digest(), "little")


def rng_for(seed: int, *purpose) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *purpose))
