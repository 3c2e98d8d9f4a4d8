"""Seeded random streams.

All randomness comes from the Philox4x64-10 counter-based generator keyed by
the 64-bit seed (``numpy.random.Philox(key=seed)``). Uniform doubles are
numpy's standard conversion ``(u64 >> 11) * 2**-53``. Gaussian samples are NOT
drawn with numpy's ziggurat; they use Box-Muller on consecutive uniform pairs
``(u1, u2)`` so that another implementation of Philox can reproduce them:

    r = sqrt(-2 ln(1 - u1));  z0 = r cos(2 pi u2);  z1 = r sin(2 pi u2)

Samples are emitted in the order z0, z1, z0', z1', ... and truncated to the
requested count.
"""

from __future__ import annotations

import math

import numpy as np

MASK64 = (1 << 64) - 1


def philox(seed: int) -> np.random.Generator:
    if not 0 <= seed <= MASK64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.Philox(key=seed))


def uniform(gen: np.random.Generator, low: float, high: float, shape) -> np.ndarray:
    n = math.prod(shape)
    u = gen.random(n)
    return (low + (high - low) * u).reshape(shape)


def standard_normal(gen: np.random.Generator, shape) -> np.ndarray:
    n = math.prod(shape)
    pairs = (n + 1) // 2
    u = gen.random(2 * pairs).reshape(pairs, 2)
    r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
    theta = 2.0 * np.pi * u[:, 1]
    z = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1).ravel()
    return z[:n].reshape(shape)


def gaussian_tensor(seed: int, shape) -> np.ndarray:
    return standard_normal(philox(seed), tuple(shape))
