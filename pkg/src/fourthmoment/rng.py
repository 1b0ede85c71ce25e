"""Counter-based random streams.

Draw number ``i`` of stream ``(seed, stream_id)`` is a pure function of the
triple, so any slice of a stream can be regenerated in isolation and work can
be split across workers without changing results.  Uniforms come from the
Philox-4x64 counter generator; normals use the inverse CDF.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

_MASK64 = (1 << 64) - 1
_WORDS_PER_BLOCK = 4


@dataclass(frozen=True)
class RandomStream:
    seed: int
    stream: int = 0

    def _key(self) -> np.ndarray:
        return np.array([self.seed & _MASK64, self.stream & _MASK64], dtype=np.uint64)

    def raw(self, count: int, start: int = 0) -> np.ndarray:
        """64-bit words ``start, ..., start + count - 1`` of the stream."""
        if count < 0 or start < 0:
            raise ValueError("count and start must be non-negative")
        block, offset = divmod(start, _WORDS_PER_BLOCK)
        bg = np.random.Philox(key=self._key())
        if block:
            bg.advance(block)
        return bg.random_raw(count + offset)[offset:]

    def uniforms(self, count: int, start: int = 0) -> np.ndarray:
        """Uniforms on the open interval (0, 1)."""
        words = self.raw(count, start) >> np.uint64(11)
        return (words.astype(np.float64) + 0.5) * 2.0**-53

    def normals(self, count: int, start: int = 0) -> np.ndarray:
        return ndtri(self.uniforms(count, start))

    def substream(self, index: int) -> "RandomStream":
        """Independent stream for a sub-task (disjoint key)."""
        return RandomStream(self.seed, (self.stream * 1_000_003 + 1 + index) & _MASK64)


def sample_points(dim: int, n: int, stream: RandomStream, start: int = 0) -> np.ndarray:
    """Gaussian points ``start .. start + n - 1`` of the stream, shape (n, dim)."""
    return stream.normals(n * dim, start * dim).reshape(n, dim)
