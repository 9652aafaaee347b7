"""Named, splittable random streams derived from one master seed.

Every source of randomness in a run (round schedules, per-slot gradient
noise, data partitioning) gets its own stream, keyed by a path of names
and counters.  Streams with different paths are statistically independent
and fully determined by ``(master_seed, path)``, so two runs that share a
seed consume identical randomness for identical purposes regardless of
how much randomness other parts of the run consume.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _word(part: str | int) -> int:
    if isinstance(part, str):
        return int.from_bytes(hashlib.sha256(part.encode("utf-8")).digest()[:8], "little")
    return int(part) & _MASK64


def stream(seed: int, *path: str | int) -> np.random.Generator:
    """Return the generator for ``path`` under ``seed``.

    ``path`` mixes string labels ("schedule", "noise", ...) and integer
    counters (round index, client slot).  The same (seed, path) always
    yields a generator in the same initial state.
    """
    entropy = [int(seed) & _MASK64]
    entropy.extend(_word(p) for p in path)
    return np.random.default_rng(np.random.SeedSequence(entropy))


class StreamFamily:
    """All streams of one run, derived from a single master seed."""

    def __init__(self, seed: int):
        self.seed = int(seed)

    def schedule(self, round_index: int) -> np.random.Generator:
        return stream(self.seed, "schedule", round_index)

    def noise(self, round_index: int, slot: int) -> np.random.Generator:
        return stream(self.seed, "noise", round_index, slot)

    def named(self, *path: str | int) -> np.random.Generator:
        return stream(self.seed, *path)
