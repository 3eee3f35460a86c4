"""Reproducible random streams addressed by (seed, path).

A stream never carries mutable state: every call to :meth:`RandomStream.generator`
returns a fresh generator positioned at the start of the substream, so the
draws seen by replication ``i`` depend only on ``(seed, path + (i,))`` and not
on which thread ran it or in which order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RandomStream:
    seed: int
    path: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not 0 <= int(self.seed) <= _MASK64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        path = tuple(int(p) for p in self.path)
        if any(not 0 <= p <= _MASK64 for p in path):
            raise ValueError("path elements must be 64-bit unsigned integers")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "path", path)

    def seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.seed_sequence()))

    def child(self, *indices: int) -> "RandomStream":
        stream = self
        for index in indices:
            stream = derive_substream(stream, index)
        return stream


def derive_substream(stream: RandomStream, index: int) -> RandomStream:
    """Return the substream of ``stream`` at ``index`` (path append)."""
    return RandomStream(stream.seed, stream.path + (int(index),))


def label_index(label: str) -> int:
    """Stable 64-bit index for a textual label (used to name substreams)."""
    import hashlib

    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")
