"""Deterministic seed derivation, bit-exact and documented.

Trial t of a run with master seed m uses splitmix64(m XOR t). Inside one
algorithm run with seed s, the independent stream for (iteration i, role r)
is seeded with splitmix64(splitmix64(s) XOR (4*i + r + 1)). Keeping one
stream per iteration and role means paired executions on neighboring
datasets stay aligned even when one execution consumes more draws than the
other.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One splitmix64 step; the canonical 64-bit mixer."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return (z ^ (z >> 31)) & MASK64


def derive_trial_seed(master_seed: int, trial: int) -> int:
    """splitmix64(master XOR trial), the documented per-trial derivation."""
    return splitmix64((master_seed ^ trial) & MASK64)


def stream_seed(run_seed: int, iteration: int, role: int) -> int:
    return splitmix64(splitmix64(run_seed) ^ (4 * iteration + role + 1))


def iteration_rng(run_seed: int, iteration: int,
                  role: int) -> np.random.Generator:
    """Independent generator for one (iteration, role) slot of a run."""
    return np.random.default_rng(stream_seed(run_seed, iteration, role))
