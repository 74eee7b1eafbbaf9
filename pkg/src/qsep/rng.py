"""Counter-based uniform variates keyed by (seed, stream, event index).

Backed by the Philox4x64-10 generator shipped with numpy.  The key is the
pair (seed, stream) and the 256-bit counter selects a block of four 64-bit
words; event ``i`` consumes word ``i % 4`` of block ``i // 4``.  The value
for an event therefore depends only on (seed, stream, i), never on how a
dataset is chunked or in which order chunks are generated.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

STREAM_OUTCOME = 0
STREAM_COMPONENT = 1


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= MASK64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def raw_words(seed: int, stream: int, start: int, stop: int) -> np.ndarray:
    """64-bit words for event indices ``start <= i < stop``."""
    if stop < start:
        raise ValueError("stop must not precede start")
    if stop == start:
        return np.empty(0, dtype=np.uint64)
    block = start // 4
    key = np.array([check_seed(seed), int(stream)], dtype=np.uint64)
    counter = np.array([block, 0, 0, 0], dtype=np.uint64)
    gen = np.random.Philox(key=key, counter=counter)
    words = gen.random_raw(stop - 4 * block)
    return words[start - 4 * block:]


def uniforms(seed: int, stream: int, start: int, stop: int) -> np.ndarray:
    """Doubles in [0, 1) built from the top 53 bits of each word."""
    words = raw_words(seed, stream, start, stop)
    return (words >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
