"""Counter-based uniform stream keyed by (seed, cell, slot).

Every value is a pure function of its key, so two windows of different size
see identical weights on their overlap and nothing depends on draw order.
The mixer is the splitmix64 finalizer applied along the key.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def _as_u64(a) -> np.ndarray:
    return np.asarray(a, dtype=np.int64).astype(np.uint64)


def hash_keys(seed: int, cells: np.ndarray, slot) -> np.ndarray:
    """64-bit hashes for integer cell coordinates ``cells`` of shape (N, k)."""
    cells = np.atleast_2d(np.asarray(cells, dtype=np.int64))
    n = cells.shape[0]
    with np.errstate(over="ignore"):
        h = _mix(np.full(n, np.uint64(seed & 0xFFFFFFFFFFFFFFFF)) + _GOLDEN)
        for j in range(cells.shape[1]):
            h = _mix(h ^ (_as_u64(cells[:, j]) + _GOLDEN * np.uint64(j + 1)))
        h = _mix(h ^ (_as_u64(np.broadcast_to(slot, (n,))) + _GOLDEN))
    return h


def uniforms(seed: int, cells: np.ndarray, slot) -> np.ndarray:
    """Uniform values in [0, 1) with 53 random bits, one per row of ``cells``."""
    h = hash_keys(seed, cells, slot)
    return (h >> _S11).astype(np.float64) * (1.0 / 9007199254740992.0)


def derive_seed(seed: int, index: int) -> int:
    """Independent child seed for replica ``index``."""
    h = hash_keys(seed, np.array([[index]]), 0x5EED)
    return int(h[0] >> np.uint64(1))
