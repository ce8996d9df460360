"""Counter-based uniform streams for reproducible parallel simulation.

Every variate is a pure function of (seed, replicate, draw): the
replicate index is hashed into a stream state with the splitmix64
finalizer and each draw offsets that state by the 64-bit golden ratio
before a second finalizer pass.  Streams therefore never depend on
execution order, so any partition of replicates across workers yields
identical output.
"""

from __future__ import annotations

import numpy as np

__all__ = ["replicate_uniforms", "stream_state"]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_INV_2_53 = 1.0 / float(1 << 53)


def _mix64(z: np.ndarray) -> np.ndarray:
    # splitmix64 output function (Stafford mix 13)
    z = (z + _GOLDEN).astype(np.uint64)
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def stream_state(seed: int, replicates: np.ndarray) -> np.ndarray:
    """Per-replicate stream states derived from (seed, replicate index)."""
    seed_word = np.uint64(int(seed) % (1 << 64))
    reps = replicates.astype(np.uint64)
    return _mix64(_mix64(np.array([seed_word])) ^ _mix64((reps + np.uint64(1)) * _GOLDEN))


def replicate_uniforms(seed: int, first: int, count: int, width: int) -> np.ndarray:
    """Uniforms in [0, 1) for replicates first..first+count-1, ``width`` draws each."""
    reps = np.arange(first, first + count, dtype=np.uint64)
    base = stream_state(seed, reps)
    offsets = (np.arange(1, width + 1, dtype=np.uint64)) * _GOLDEN
    words = _mix64(base[:, None] + offsets[None, :])
    return (words >> np.uint64(11)).astype(np.float64) * _INV_2_53
