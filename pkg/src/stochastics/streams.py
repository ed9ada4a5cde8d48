from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Callable, Optional

import numpy as np

MASK64 = (1 << 64) - 1
BLOCK = 4096


class Purpose(IntEnum):
    INTERAPPEARANCE = 1
    SERVICE = 2
    ROUTING_UNIFORM = 3
    ORIGIN_DRAW = 4
    LOCATION_DRAW = 5


@dataclass(frozen=True)
class StreamLabel:
    """Names one random stream; `station=None` on SERVICE is the shared per-customer stream."""

    purpose: Purpose
    replication_index: int = 0
    station: Optional[int] = None

    @classmethod
    def service(cls, station: Optional[int], replication_index: int = 0) -> "StreamLabel":
        return cls(Purpose.SERVICE, replication_index, station)


def derive_stream(base_seed: int, label: StreamLabel) -> np.random.Generator:
    """PCG64 generator keyed by (seed, purpose, station, replication).

    SeedSequence hashes the key words into the generator state, so streams
    depend on their label only and never on draw order elsewhere.
    """
    station_word = 0 if label.station is None else int(label.station) + 1
    seq = np.random.SeedSequence(
        [int(base_seed) & MASK64, int(label.purpose), station_word, int(label.replication_index)]
    )
    return np.random.Generator(np.random.PCG64(seq))


Sampler = Callable[[np.random.Generator, int], np.ndarray]


class BufferedStream:
    """Hands out scalar draws from blocks produced by a vectorized sampler."""

    def __init__(self, gen: np.random.Generator, sampler: Optional[Sampler] = None, block: int = BLOCK):
        self.gen = gen
        self.sampler: Sampler = sampler or (lambda g, size: g.random(size))
        self.block = block
        self._buf = np.empty(0)
        self._pos = 0

    def __call__(self) -> float:
        if self._pos >= len(self._buf):
            self._buf = self.sampler(self.gen, self.block)
            self._pos = 0
        x = self._buf[self._pos]
        self._pos += 1
        return float(x)

    def take(self, count: int) -> np.ndarray:
        return np.array([self() for _ in range(count)])


def open_stream(
    base_seed: int, label: StreamLabel, sampler: Optional[Sampler] = None
) -> BufferedStream:
    return BufferedStream(derive_stream(base_seed, label), sampler)
