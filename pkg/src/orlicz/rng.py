"""Counter-based random streams.

A stream is named by ``(seed, stream_id)``; block ``c`` of that stream is a
pure function of the triple, so splitting work into chunks (or running
chunks in any order) reproduces the serial output bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

_MASK = (1 << 64) - 1

# draws per counter block; every sampler walks its output in blocks of this size
BLOCK = 1 << 14


@dataclass(frozen=True)
class SeedSpec:
    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool):
                raise ValidationError(f"{name} must be an integer")
            if not 0 <= int(v) <= _MASK:
                raise ValidationError(f"{name} must fit in 64 unsigned bits")

    def substream(self, k: int) -> "SeedSpec":
        """Independent child stream; children of distinct parents never collide."""
        return SeedSpec(self.seed, (self.stream_id * 0x9E3779B97F4A7C15 + k + 1) & _MASK)

    def to_dict(self) -> dict:
        return {"seed": int(self.seed), "stream_id": int(self.stream_id)}

    @classmethod
    def coerce(cls, s) -> "SeedSpec":
        if isinstance(s, SeedSpec):
            return s
        if isinstance(s, dict):
            return cls(int(s["seed"]), int(s.get("stream_id", 0)))
        return cls(int(s))


def block_generator(seed: SeedSpec, block: int) -> np.random.Generator:
    """Generator for counter block ``block`` of the stream."""
    key = np.array([seed.seed & _MASK, seed.stream_id & _MASK], dtype=np.uint64)
    # the block index occupies the high counter words, the low words count draws
    counter = np.array([0, 0, block & _MASK, block >> 64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def blocks(n: int):
    """``(block_index, start, stop)`` covering ``range(n)`` in counter order."""
    for b, start in enumerate(range(0, n, BLOCK)):
        yield b, start, min(start + BLOCK, n)
