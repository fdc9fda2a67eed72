"""Counter-based random streams.

Every draw in the package comes from a Philox generator keyed by a
SeedSequence built from (master seed, stream keys...). Streams therefore do
not depend on how trials are scheduled across threads.
"""
import hashlib

import numpy as np

SEED_MASK = (1 << 64) - 1


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Return the generator for the stream ``(seed, *keys)``.

    Args:
        seed: 64-bit master seed
        *keys: Non-negative integers naming the sub-stream (trial index, cell block, ...)

    Returns:
        Independent numpy Generator backed by Philox
    """
    entropy = [int(seed) & SEED_MASK, *(int(k) for k in keys)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def stream_id(name: str) -> int:
    """Stable 32-bit integer for a stream label such as an experiment name."""
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")
