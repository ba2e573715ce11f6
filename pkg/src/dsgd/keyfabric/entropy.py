"""Entropy sources feeding the key fabric and the share dealer.

The physical/quantum random number generator of a real deployment is out of
reach here; :class:`EntropySource` marks the substitution point. Seeded
sources make whole runs reproducible, :class:`OsEntropy` is for normal use.
"""

from __future__ import annotations

import os
import threading
from typing import Protocol

import numpy as np


class EntropySource(Protocol):
    def draw(self, nbytes: int) -> bytes: ...


class SeededEntropy:
    """Deterministic generator (PCG64). Draws are serialized."""

    def __init__(self, seed: int):
        self.seed = seed
        self._rng = np.random.Generator(np.random.PCG64(seed))
        self._lock = threading.Lock()
        self.drawn = 0

    def draw(self, nbytes: int) -> bytes:
        if nbytes < 0:
            raise ValueError("nbytes must be >= 0")
        with self._lock:
            self.drawn += nbytes
            return self._rng.bytes(nbytes)

    def spawn(self, label: str) -> "SeededEntropy":
        """Independent child stream; same (seed, label) always yields the same child."""
        tag = int.from_bytes(label.encode(), "big") % (1 << 63)
        return SeededEntropy(hash_seed(self.seed, tag))

    def __getstate__(self):
        state = self.__dict__.copy()
        del state["_lock"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()


class OsEntropy:
    def __init__(self):
        self.drawn = 0
        self._lock = threading.Lock()

    def draw(self, nbytes: int) -> bytes:
        if nbytes < 0:
            raise ValueError("nbytes must be >= 0")
        with self._lock:
            self.drawn += nbytes
        return os.urandom(nbytes)

    def spawn(self, label: str) -> "OsEntropy":
        return OsEntropy()

    def __getstate__(self):
        return {"drawn": self.drawn}

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()


def hash_seed(*parts: int) -> int:
    ss = np.random.SeedSequence(list(parts))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_entropy(seed: int | None) -> EntropySource:
    return OsEntropy() if seed is None else SeededEntropy(seed)
