"""Keyed, counter-based random streams.

Every random draw in the package comes from a Philox generator keyed by
``(seed, role, index...)``.  Streams with different keys are statistically
independent, and a given key always reproduces the same draws regardless of
what else ran before it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ROLES = {"pairs": 0, "wpool": 1, "bootstrap": 2}


@dataclass(frozen=True)
class StreamKey:
    seed: int
    role: str
    index: tuple[int, ...] = ()

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown stream role {self.role!r}; expected one of {sorted(ROLES)}")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(ROLES[self.role], *self.index))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, *index: int) -> "StreamKey":
        return StreamKey(self.seed, self.role, self.index + tuple(index))


def stream(seed: int, role: str, *index: int) -> StreamKey:
    return StreamKey(int(seed), role, tuple(int(i) for i in index))


def as_generator(src) -> np.random.Generator:
    """Accept a :class:`StreamKey`, a Generator, or an int seed."""
    if isinstance(src, StreamKey):
        return src.generator()
    if isinstance(src, np.random.Generator):
        return src
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(src))))
