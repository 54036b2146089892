"""Counter-based sub-seed derivation.

All randomness in a run flows from one global seed.  Sub-streams are derived
by hashing the global seed together with a path of integers/strings, so any
component can be re-seeded independently and reproducibly.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def _encode(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & _MASK64
    if isinstance(part, str):
        # stable across processes (unlike hash())
        h = 1469598103934665603
        for b in part.encode("utf-8"):
            h = ((h ^ b) * 1099511628211) & _MASK64
        return h
    raise TypeError(f"unsupported seed path element: {part!r}")


def subseed(seed: int, *path) -> int:
    """Derive a 64-bit sub-seed from ``seed`` and a path of labels/counters."""
    entropy = [int(seed) & _MASK64] + [_encode(p) for p in path]
    ss = np.random.SeedSequence(entropy)
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def rng_for(seed: int, *path) -> np.random.Generator:
    """Generator seeded by :func:`subseed`."""
    return np.random.default_rng(subseed(seed, *path))
