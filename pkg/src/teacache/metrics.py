"""Quality and efficiency measures on final latents."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateVariance, GridTooSmall, ShapeMismatch
from .tensor import as_tensor, check_same_shape, rel_l1_distance

SSIM_WINDOW = 8
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass(frozen=True)
class QualityReport:
    mse: float
    psnr: float
    ssim: float
    rel_l1: float


def mse(a, b) -> float:
    a, b = as_tensor(a), as_tensor(b)
    check_same_shape(a, b)
    return float(np.mean((a - b) ** 2))


def psnr(a, b, data_range: float) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` when the inputs are equal."""
    if not data_range > 0:
        raise ValueError(f"data_range must be positive, got {data_range}")
    err = mse(a, b)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(data_range**2 / err)


def _as_grid(t, grid) -> np.ndarray:
    t = as_tensor(t)
    if grid is None:
        if t.ndim != 2:
            raise ShapeMismatch("declare a 2-D grid for tensors that are not 2-D")
        return t
    if math.prod(grid) != t.size:
        raise ShapeMismatch(f"grid {grid} does not hold {t.size} elements")
    return t.reshape(grid)


def ssim(a, b, data_range: float, grid: tuple[int, int] | None = None) -> float:
    """Mean SSIM over non-overlapping 8x8 windows (stride 8).

    Window statistics use population (biased) variances.
    """
    if not data_range > 0:
        raise ValueError(f"data_range must be positive, got {data_range}")
    a, b = as_tensor(a), as_tensor(b)
    check_same_shape(a, b)
    a, b = _as_grid(a, grid), _as_grid(b, grid)
    rows, cols = a.shape
    w = SSIM_WINDOW
    if rows < w or cols < w:
        raise GridTooSmall(f"grid {a.shape} is smaller than one {w}x{w} window")
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    values = []
    for i in range(0, rows - w + 1, w):
        for j in range(0, cols - w + 1, w):
            pa = a[i : i + w, j : j + w]
            pb = b[i : i + w, j : j + w]
            mu_a, mu_b = pa.mean(), pb.mean()
            var_a = ((pa - mu_a) ** 2).mean()
            var_b = ((pb - mu_b) ** 2).mean()
            cov = ((pa - mu_a) * (pb - mu_b)).mean()
            num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
            den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
            values.append(num / den)
    return float(np.mean(values))


def pearson(xs, ys) -> float:
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ShapeMismatch("pearson needs two 1-D sequences of equal length")
    if x.size < 2:
        raise DegenerateVariance("need at least two points")
    dx, dy = x - x.mean(), y - y.mean()
    sx, sy = math.sqrt(float(dx @ dx)), math.sqrt(float(dy @ dy))
    if sx == 0.0 or sy == 0.0:
        raise DegenerateVariance("one of the sequences is constant")
    return max(-1.0, min(1.0, float(dx @ dy) / (sx * sy)))


def schedule_jaccard(a, b) -> float:
    sa = set(getattr(a, "steps", a))
    sb = set(getattr(b, "steps", b))
    union = sa | sb
    if not union:
        return 1.0
    return len(sa & sb) / len(union)


def speedup_ratio(stats, T: int | None = None) -> float:
    T = stats.steps if T is None else T
    if stats.computed_steps < 1:
        raise ValueError("speedup undefined without any computed step")
    return T / stats.computed_steps


def data_range_of(reference) -> float:
    ref = as_tensor(reference)
    rng = float(ref.max() - ref.min())
    return rng if rng > 0 else 1.0


def quality_report(result, reference, grid: tuple[int, int] | None = None) -> QualityReport:
    """Compare ``result`` against the baseline latent ``reference``."""
    dr = data_range_of(reference)
    return QualityReport(
        mse=mse(result, reference),
        psnr=psnr(result, reference, dr),
        ssim=ssim(result, reference, dr, grid),
        rel_l1=rel_l1_distance(result, reference),
    )
