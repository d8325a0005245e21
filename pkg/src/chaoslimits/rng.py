"""Counter-based standard normals keyed by (seed, stream, sample index).

Samples are produced in fixed-size blocks.  Block ``b`` of stream ``s`` is
drawn from a Philox4x64 generator with key ``(seed, s)`` and counter
``(0, b, 0, 0)``, so every sample index maps to the same bits no matter how
blocks are scheduled across threads.  Uniforms come from the top 53 bits of
each word, shifted by half an ulp so they lie strictly inside (0, 1), and
are mapped to normals by the inverse normal CDF.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.special import ndtri

DEFAULT_BLOCK = 4096
_MASK64 = (1 << 64) - 1


def _block_normals(seed: int, stream: int, block: int, rows: int, width: int) -> np.ndarray:
    bitgen = np.random.Philox(key=[seed & _MASK64, stream & _MASK64], counter=[0, block, 0, 0])
    raw = bitgen.random_raw(rows * width)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u).reshape(rows, width)


def standard_normals(
    seed: int,
    n: int,
    width: int,
    *,
    stream: int = 0,
    start: int = 0,
    block_size: int = DEFAULT_BLOCK,
    workers: int = 1,
) -> np.ndarray:
    """Rows ``start .. start+n-1`` of an (infinite) matrix of iid N(0,1) draws.

    Row i depends only on (seed, stream, i, width, block_size); ``workers``
    changes scheduling, never values.
    """
    if n < 0 or width < 1:
        raise ValueError("need n >= 0 and width >= 1")
    if n == 0:
        return np.empty((0, width))
    first = start // block_size
    last = (start + n - 1) // block_size
    blocks = list(range(first, last + 1))

    def one(b: int) -> np.ndarray:
        return _block_normals(seed, stream, b, block_size, width)

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, blocks))
    else:
        parts = [one(b) for b in blocks]
    full = np.concatenate(parts, axis=0)
    offset = start - first * block_size
    return full[offset : offset + n]
