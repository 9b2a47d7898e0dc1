"""Counter-based uniforms keyed by (seed, level, word code).

A node's label depends only on its key, never on sampling order, so lazy
deepening, batching and any split of trials across workers all reproduce the
same realization.  The mixing function is the SplitMix64 finalizer.
"""
from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = (np.uint64(s) for s in (30, 27, 31, 11))
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


def mix64(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = x + _GOLDEN
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def level_key(seed, level: int) -> np.ndarray:
    seed = np.asarray(seed, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(seed ^ mix64(np.uint64(level) * _GOLDEN))


def node_uniforms(key: np.ndarray, codes: np.ndarray) -> np.ndarray:
    """Uniforms in [0, 1) for nodes ``codes`` under per-node (or shared) ``key``."""
    h = mix64(np.asarray(key, dtype=np.uint64) ^ mix64(np.asarray(codes, dtype=np.uint64)))
    return (h >> _S11).astype(np.float64) * _INV53


def trial_seeds(seed: int, n: int, offset: int = 0) -> np.ndarray:
    """Per-trial 64-bit seeds derived from a master seed."""
    idx = np.arange(offset, offset + n, dtype=np.uint64)
    return mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) ^ mix64(idx))
