"""Seed derivation and uniform-draw generation.

The generator family is fixed: PCG64 for the draws, a SplitMix64 avalanche
chain for deriving per-replicate, per-stage seeds. Results are reproducible
bit-for-bit within this implementation; cross-library reproducibility is not
a goal.
"""
from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# Salts keep the per-stage streams disjoint. "sampling" and "missingness" are
# the per-replicate stages; "scenario" derives one master seed per scenario so
# scenarios never share draws even under a single config-level seed.
_STAGE_SALTS = {
    "sampling": 0x53A44D0A5B2CFB3D,
    "missingness": 0x7D0BE4D2C3A5F291,
    "scenario": 0x2545F4914F6CDD1D,
}


def _splitmix64(z: int) -> int:
    z = (z + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, index: int, stage: str) -> int:
    """Mix (master, replicate index, stage) into an independent 64-bit seed."""
    try:
        salt = _STAGE_SALTS[stage]
    except KeyError:
        raise ValueError(f"unknown stage {stage!r}") from None
    h = _splitmix64(master & _MASK64)
    h = _splitmix64(h ^ ((index * _GOLDEN + 1) & _MASK64))
    return _splitmix64(h ^ salt)


def uniform_block(seed: int, shape) -> np.ndarray:
    """A C-contiguous float64 block of U(0,1) draws from a fresh PCG64 stream."""
    return np.random.Generator(np.random.PCG64(seed)).random(shape)
