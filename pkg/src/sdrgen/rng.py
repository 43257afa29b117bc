"""Counter-based, labelled random streams.

Every random draw in a frame goes through an :class:`RngStream` keyed by
``(master_seed, frame_index, label)``.  The key is hashed with BLAKE2b into a
128-bit Philox key, so streams for different frames or labels never share
state and can be created in any order, in any process.
"""

from __future__ import annotations

import hashlib
from typing import Sequence

import numpy as np

PRNG_ALGORITHM = "philox4x64-10/blake2b-128-key/numpy-generator"


def _derive_key(master_seed: int, frame_index: int, label: str) -> int:
    payload = f"{int(master_seed) & 0xFFFFFFFFFFFFFFFF}:{int(frame_index)}:{label}".encode()
    return int.from_bytes(hashlib.blake2b(payload, digest_size=16).digest(), "little")


class RngStream:
    """A single-owner random stream for one (seed, frame, label) triple."""

    __slots__ = ("master_seed", "frame_index", "label", "_gen")

    def __init__(self, master_seed: int, frame_index: int, label: str):
        if master_seed < 0 or frame_index < 0:
            raise ValueError("master_seed and frame_index must be non-negative")
        self.master_seed = int(master_seed)
        self.frame_index = int(frame_index)
        self.label = str(label)
        key = _derive_key(self.master_seed, self.frame_index, self.label)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.master_seed}, frame={self.frame_index}, label={self.label!r})"

    def fork(self, sublabel: str) -> "RngStream":
        """Independent child stream; draws on the child never touch the parent."""
        return RngStream(self.master_seed, self.frame_index, f"{self.label}/{sublabel}")

    def random(self) -> float:
        return float(self._gen.random())

    def uniform(self, low: float = 0.0, high: float = 1.0) -> float:
        if high == low:
            return float(low)
        return float(self._gen.uniform(low, high))

    def integers(self, low: int, high: int) -> int:
        """Uniform integer in the closed interval ``[low, high]``."""
        return int(self._gen.integers(low, high, endpoint=True))

    def normal(self, mean: float = 0.0, std: float = 1.0) -> float:
        return float(self._gen.normal(mean, std))

    def poisson(self, lam: float) -> int:
        return int(self._gen.poisson(lam))

    def choice_index(self, weights: Sequence[float]) -> int:
        w = np.asarray(weights, dtype=float)
        cdf = np.cumsum(w)
        u = self._gen.random() * cdf[-1]
        return int(min(np.searchsorted(cdf, u, side="right"), len(w) - 1))

    def choice(self, items: Sequence):
        return items[int(self._gen.integers(0, len(items)))]

    def shuffled(self, items: Sequence) -> list:
        order = self._gen.permutation(len(items))
        return [items[i] for i in order]

    def array(self, n: int) -> np.ndarray:
        """``n`` uniforms in [0, 1) as a float64 array."""
        return self._gen.random(n)


def make_stream(master_seed: int, frame_index: int, substream_label: str) -> RngStream:
    return RngStream(master_seed, frame_index, substream_label)
