"""Dense float64 tensors and the norms used for difference estimation.

Tensors are plain ``numpy.ndarray`` objects of dtype float64 in C (row-major)
order. :func:`as_tensor` is the single entry point that normalizes input and
enforces finiteness; every helper here returns read-only arrays so values can be
shared between concurrent readers without defensive copies.
"""

from __future__ import annotations

import numpy as np

from .errors import NonFinite, ShapeMismatch, ZeroDenominator

Tensor = np.ndarray


def as_tensor(values, *, copy: bool = False) -> Tensor:
    if copy:
        arr = np.array(values, dtype=np.float64, order="C")
    else:
        arr = np.ascontiguousarray(values, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if not np.isfinite(arr).all():
        raise NonFinite("tensor contains NaN or Inf")
    return arr


def frozen(arr: Tensor) -> Tensor:
    """Mark ``arr`` read-only and return it."""
    arr.setflags(write=False)
    return arr


def check_same_shape(a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeMismatch(f"shape {a.shape} != {b.shape}")


def l1_norm(t) -> float:
    return float(np.abs(as_tensor(t)).sum())


def rel_l1_distance(a, b) -> float:
    """Relative L1 distance ``|a - b|_1 / |b|_1``; ``b`` is the reference."""
    return rel_l1_validated(as_tensor(a), as_tensor(b))


def rel_l1_validated(a: Tensor, b: Tensor) -> float:
    """``rel_l1_distance`` for operands that already went through ``as_tensor``."""
    check_same_shape(a, b)
    denom = float(np.abs(b).sum())
    if denom == 0.0:
        raise ZeroDenominator("reference tensor has zero L1 norm")
    return float(np.abs(a - b).sum()) / denom


def checksum(t) -> float:
    """Position-weighted sum over the row-major data.

    Weights cycle through 1..7 so that permutations and sign flips that leave a
    plain sum unchanged still move the checksum.
    """
    flat = as_tensor(t).ravel(order="C")
    weights = (np.arange(flat.size) % 7 + 1).astype(np.float64)
    return float(np.dot(flat, weights))
