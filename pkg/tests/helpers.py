"""Shared generators for randomized friction-algebra tests."""

from __future__ import annotations

import numpy as np


def random_connected_coupling(rng: np.random.Generator, n: int) -> np.ndarray:
    """Symmetric nonnegative coupling matrix whose positive-entry graph is
    connected: a random spanning-tree backbone plus a few extra edges."""
    b = np.zeros((n, n))
    order = rng.permutation(n)
    for idx in range(1, n):
        i = order[idx]
        j = order[rng.integers(0, idx)]  # attach to an earlier tree node
        w = rng.uniform(0.2, 3.0)
        b[i, j] = b[j, i] = w
    for _ in range(int(rng.integers(0, n))):
        i, j = rng.integers(0, n, size=2)
        if i != j:
            w = rng.uniform(0.0, 2.0)
            b[i, j] = b[j, i] = b[i, j] + w
    return b


def random_rho(rng: np.random.Generator, n: int, lo: float = 0.1, hi: float = 10.0) -> np.ndarray:
    return rng.uniform(lo, hi, size=n)
