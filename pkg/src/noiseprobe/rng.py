"""Deterministic 64-bit randomness primitives.

Everything random in this package flows through the SplitMix64 generator
defined here, used in counter mode: draw i of a stream seeded with s is
``finalize(s + (i+1) * GOLDEN)``.  The counter form makes streams cheap to
vectorize and guarantees that concurrent consumers can never share state.

Seed derivation for per-image / per-step streams uses the same finalizer as
an avalanche mix over (root seed, image id, indices), so results do not
depend on execution order.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3

# 53-bit mantissa scaling: maps the top 53 bits of a uint64 onto [0, 1).
_INV_2_53 = 2.0 ** -53


def mix64(x: int) -> int:
    """SplitMix64 finalizer on a 64-bit integer (scalar form)."""
    x &= _MASK
    x = ((x ^ (x >> 30)) * _MIX1) & _MASK
    x = ((x ^ (x >> 27)) * _MIX2) & _MASK
    return (x ^ (x >> 31)) & _MASK


def fnv1a64(data: bytes) -> int:
    """FNV-1a hash of a byte string, used to fold image ids into seeds."""
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK
    return h


def derive_seed(root: int, image_id: str, *indices: int) -> int:
    """Derive an independent stream seed from (root, image id, indices).

    The rule is fixed: ``h = mix64(root)``, then ``h = mix64(h ^ fnv1a64(id))``,
    then ``h = mix64(h ^ index)`` for each index in order.  Escalation runs
    pass the step index; curve runs pass (density index, repeat index).
    """
    h = mix64(root)
    h = mix64(h ^ fnv1a64(image_id.encode("utf-8")))
    for ix in indices:
        h = mix64(h ^ (int(ix) & _MASK))
    return h


def uniform_stream(seed: int, n: int) -> np.ndarray:
    """First *n* uniform float64 draws in [0, 1) of the stream for *seed*.

    Vectorized counter-mode SplitMix64; draw order is the array order, which
    callers map onto samples row-major (then channel).
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    base = np.uint64(seed & _MASK)
    ctr = np.arange(1, n + 1, dtype=np.uint64) * np.uint64(_GOLDEN) + base
    z = ctr
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * _INV_2_53
