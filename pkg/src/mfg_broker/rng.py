"""Counter-based random streams.

Every consumer of randomness asks for a stream by ``(seed, purpose, rep,
index)``.  The tuple is packed into the 128-bit Philox key, so a path's draws
depend only on its own coordinates and never on how work is scheduled.
"""

import numpy as np

MASK64 = (1 << 64) - 1

# stream purposes (8 bits)
ALPHA = 1
PRIVATE = 2
PRICE = 3
DIRECTION = 4
CONCAVITY = 5
TYPES = 6
PRIVATE_BLOCK = 7


def stream(seed: int, purpose: int, rep: int = 0, index: int = 0) -> np.random.Generator:
    if not (0 <= purpose < 256 and 0 <= rep < (1 << 24) and 0 <= index < (1 << 32)):
        raise ValueError("stream coordinates out of range")
    tag = (purpose << 56) | (rep << 32) | index
    key = ((tag & MASK64) << 64) | (int(seed) & MASK64)
    return np.random.Generator(np.random.Philox(key=key))


def normals(seed: int, purpose: int, indices, n: int, rep: int = 0) -> np.ndarray:
    """Standard normals of shape ``(len(indices), n)``; row ``i`` comes from
    the stream of ``indices[i]``."""
    indices = np.asarray(indices)
    out = np.empty((indices.size, n))
    for row, idx in enumerate(indices):
        out[row] = stream(seed, purpose, rep, int(idx)).standard_normal(n)
    return out
