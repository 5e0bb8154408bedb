"""Counter-based normals keyed on ``(seed, stream, path, step)``.

Path ``p`` at step ``j`` always reads the same Philox word, whatever the
chunking, which is what coupled multi-level runs need.
"""
from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_MASK64 = (1 << 64) - 1
_WORDS = 4  # 64-bit words per Philox4x64 block


def _generator(seed: int, stream: int, block: int, step: int) -> np.random.Philox:
    key = np.array([seed & _MASK64, stream & _MASK64], dtype=np.uint64)
    counter = np.array([block, step, 0, 0], dtype=np.uint64)
    return np.random.Philox(key=key, counter=counter)


def uniforms(seed: int, step: int, p0: int, p1: int, stream: int = 0) -> np.ndarray:
    """Open-interval uniforms for paths ``p0 <= p < p1`` at ``step``."""
    if p1 < p0 or p0 < 0:
        raise ValueError("need 0 <= p0 <= p1")
    base = p0 - p0 % _WORDS
    raw = _generator(seed, stream, base // _WORDS, step).random_raw(p1 - base)[p0 - base:]
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


def normals(seed: int, step: int, p0: int, p1: int, stream: int = 0) -> np.ndarray:
    """Standard normals for paths ``p0 <= p < p1`` at ``step`` (inverse CDF)."""
    return ndtri(uniforms(seed, step, p0, p1, stream))
