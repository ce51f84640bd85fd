"""
Deterministic seed derivation

All randomness in a run flows from one master seed. Child seeds are derived as
splitmix64(master XOR index), so run i of an ensemble or cell i of a sweep
always gets the same stream no matter how the work is scheduled.
"""

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(value: int) -> int:
    z = (value + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, index: int) -> int:
    return splitmix64((int(master) & MASK64) ^ (int(index) & MASK64))


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed) & MASK64)
