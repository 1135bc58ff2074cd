"""Deterministic seed derivation for nested randomized stages.

Every randomized stage (bootstrap draws, feature subsets, data splits,
repeat loops) gets its own child seed derived from a master seed and a
stage index, so runs are reproducible end to end and independent stages
never share a stream.
"""
from __future__ import annotations

_MASK = (1 << 64) - 1


def derive_seed(master: int, index: int) -> int:
    """Derive a child seed from ``master`` and a stage ``index``.

    Uses a splitmix64-style finalizer on the combined value.  The map is
    deterministic and spreads consecutive indices across the 64-bit range.
    """
    z = (int(master) * 0x9E3779B97F4A7C15 + (int(index) + 1) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK
