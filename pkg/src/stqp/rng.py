"""Deterministic, splittable random streams.

Every stochastic routine in the package draws from a counter-based Philox
generator keyed by ``(seed, *stream_path)``.  Streams with different paths
are statistically independent, so workers can own disjoint replication
ranges while the merged result stays byte-identical regardless of the
worker count.
"""

from __future__ import annotations

import numpy as np

__all__ = ["stream", "substream_seed"]

_SEED_MASK = (1 << 64) - 1


def stream(seed: int, *path: int) -> np.random.Generator:
    """Return the generator for stream ``path`` under the global ``seed``.

    The same ``(seed, path)`` always yields a bit-identical stream.
    """
    ss = np.random.SeedSequence(entropy=int(seed) & _SEED_MASK,
                                spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(seed=ss))


def substream_seed(seed: int, *path: int) -> int:
    """Derive a 64-bit child seed, for APIs that accept a seed rather
    than a generator."""
    ss = np.random.SeedSequence(entropy=int(seed) & _SEED_MASK,
                                spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
