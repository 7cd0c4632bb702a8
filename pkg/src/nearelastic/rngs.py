"""Counter-based random number streams.

Every stochastic routine in this package draws from a Philox generator
derived from a (seed, *path) key, where the path components name the
experiment, replica, wall, etc.  Streams are independent of execution
order and thread scheduling, so serial and parallel runs of the same
configuration produce identical numbers.
"""

import hashlib

import numpy as np

__all__ = ["substream", "path_key", "replica_blocks"]


def path_key(*path):
    """Map arbitrary path components (ints, strings) to stable uint32 words."""
    words = []
    for part in path:
        if isinstance(part, (int, np.integer)):
            words.append(int(part) & 0xFFFFFFFF)
            words.append((int(part) >> 32) & 0xFFFFFFFF)
        else:
            digest = hashlib.sha256(str(part).encode()).digest()
            words.append(int.from_bytes(digest[:4], "little"))
    return tuple(words)


def substream(seed, *path):
    """Return a Philox-backed Generator keyed by (seed, *path)."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=path_key(*path))
    return np.random.Generator(np.random.Philox(ss))


def replica_blocks(n_replicas, block_size=1024):
    """Fixed partition of replica indices into blocks.

    The block layout is independent of thread count, so any scheduler that
    processes whole blocks reproduces the serial result bit for bit.
    """
    return [
        range(lo, min(lo + block_size, n_replicas))
        for lo in range(0, n_replicas, block_size)
    ]
