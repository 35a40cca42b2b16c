"""Counter-based uniforms keyed by (seed, pulse index, draw slot).

``u(seed, n, s) = (mix64(seed_key + (n * SLOTS + s + 1) * GAMMA) >> 11) * 2**-53``
with ``seed_key = mix64(seed + GAMMA)`` and ``mix64`` the SplitMix64
finaliser. All arithmetic is modulo 2**64. Because every draw is a pure
function of its key, any partitioning of the pulse range reproduces the same
stream.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
SLOTS = 32
INV_2_53 = 1.0 / (1 << 53)

# draw slots
SLOT_M = 0
SLOT_K = 1
SLOT_DET_I1 = 2
SLOT_DET_S2 = 3
SLOT_DET_I2 = 4
SLOT_NOISE_I1 = 5
SLOT_NOISE_S2 = 6
SLOT_NOISE_I2 = 7
SLOT_LEAK_M = 8
SLOT_LEAK_S2 = 9
SLOT_LEAK_I2 = 10
SLOT_JITTER = 11  # 11..16: (radius, angle) per channel i1, s2, i2


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def seed_key(seed: int) -> int:
    return mix64((seed & MASK64) + GAMMA)


def uniform(seed: int, pulse: int, slot: int) -> float:
    """Scalar reference implementation."""
    key = seed_key(seed)
    x = (key + (pulse * SLOTS + slot + 1) * GAMMA) & MASK64
    return (mix64(x) >> 11) * INV_2_53


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(MIX1)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(MIX2)
    return z ^ (z >> np.uint64(31))


def uniforms(key: int, pulses: np.ndarray, slot: int) -> np.ndarray:
    """Vectorised draws for an array of pulse indices (uint64)."""
    counter = pulses * np.uint64(SLOTS) + np.uint64(slot + 1)
    x = np.uint64(key) + counter * np.uint64(GAMMA)
    return (_mix64_array(x) >> np.uint64(11)).astype(np.float64) * INV_2_53
