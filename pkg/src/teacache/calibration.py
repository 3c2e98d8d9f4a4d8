"""Offline fit of the difference rescaler.

Uncached runs record, for each consecutive pair of steps, the relative L1
change of the indicator (``x``) and of the model output (``y``). All points
from all seeds are pooled into one least-squares polynomial fit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import model as dit
from .errors import DegenerateDesign, FormatError, InsufficientData
from .policy import AlwaysComputePolicy, IndicatorMode
from .rescaler import PolyRescaler, evaluate, load_rescaler, save_rescaler  # noqa: F401
from .sampler import SamplerConfig, run_sampler

DEFAULT_ORDER = 4
DEFAULT_SEED_COUNT = 8
TRACE_HEADER = ["step", "x_input_diff", "y_output_diff"]

# relative pivot size below which the scaled design is treated as rank deficient
_RANK_TOL = 1e-10


@dataclass
class DiffTrace:
    steps: list[int]
    xs: list[float]
    ys: list[float]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if not len(self.steps) == len(self.xs) == len(self.ys):
            raise ValueError("steps, xs and ys must have equal length")
        for v in (*self.xs, *self.ys):
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"trace values must be finite and nonnegative, got {v}")

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.xs, self.ys))

    def __len__(self) -> int:
        return len(self.xs)


def record_trace(weights: dit.ModelWeights, config: SamplerConfig, mode, seeds, cond=None) -> list[DiffTrace]:
    """One uncached run per seed; returns one trace of ``T - 1`` points each."""
    seeds = list(seeds)
    if not seeds:
        raise InsufficientData("record_trace needs at least one seed")
    mode = IndicatorMode.parse(mode)
    traces = []
    for seed in seeds:
        cfg = SamplerConfig(config.schedule, int(seed), True, config.time_scale)
        result = run_sampler(weights, cfg, AlwaysComputePolicy(mode), cond)
        steps, xs, ys = [], [], []
        for rec in result.trajectory[1:]:
            steps.append(rec.t)
            xs.append(rec.indicator_diff)
            ys.append(rec.true_output_diff)
        prov = {
            "weight_seed": weights.config.weight_seed,
            "noise_seed": int(seed),
            "schedule": config.schedule.name,
            "mode": mode.value,
        }
        traces.append(DiffTrace(steps, xs, ys, prov))
    return traces


def _pooled(traces) -> tuple[np.ndarray, np.ndarray]:
    xs = np.array([x for tr in traces for x in tr.xs], dtype=np.float64)
    ys = np.array([y for tr in traces for y in tr.ys], dtype=np.float64)
    return xs, ys


def _expand_shifted(b: np.ndarray, lo: float, span: float) -> np.ndarray:
    """Coefficients in ``x`` of ``sum_k b_k ((x - lo) / span) ** k``."""
    n = len(b)
    a = np.zeros(n)
    for k in range(n):
        ck = b[k] / span**k
        for j in range(k + 1):
            a[j] += ck * math.comb(k, j) * (-lo) ** (k - j)
    return a


def fit_polynomial_points(xs, ys, order: int) -> np.ndarray:
    """Least-squares coefficients (lowest order first) for ``y ~ poly(x)``.

    The abscissae are mapped onto [0, 1] before building the Vandermonde
    matrix, solved by Householder QR, and the result is mapped back.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if order < 0:
        raise ValueError("order must be nonnegative")
    if xs.size < order + 1:
        raise InsufficientData(f"order {order} needs at least {order + 1} points, got {xs.size}")
    lo, hi = float(xs.min()), float(xs.max())
    span = hi - lo
    if order >= 1 and span == 0.0:
        raise DegenerateDesign("all x values are identical")
    if span == 0.0:
        span = 1.0
    u = (xs - lo) / span
    V = np.vander(u, order + 1, increasing=True)
    q, r = np.linalg.qr(V, mode="reduced")
    diag = np.abs(np.diag(r))
    if diag.min() <= _RANK_TOL * diag.max():
        raise DegenerateDesign("design matrix is rank deficient")
    b = _back_substitute(r, q.T @ ys)
    return _expand_shifted(b, lo, span)


def _back_substitute(r: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    n = r.shape[0]
    out = np.zeros(n)
    for i in range(n - 1, -1, -1):
        out[i] = (rhs[i] - r[i, i + 1 :] @ out[i + 1 :]) / r[i, i]
    return out


def fit_polynomial(traces: list[DiffTrace], order: int = DEFAULT_ORDER) -> PolyRescaler:
    xs, ys = _pooled(traces)
    coeffs = fit_polynomial_points(xs, ys, order)
    prov = {}
    if traces:
        first = traces[0].provenance
        prov = {
            "weight_seed": first.get("weight_seed"),
            "schedule": first.get("schedule"),
            "mode": first.get("mode"),
            "noise_seeds": [tr.provenance.get("noise_seed") for tr in traces],
        }
    return PolyRescaler(tuple(coeffs), prov)


def fit_residual(rescaler: PolyRescaler | None, traces: list[DiffTrace]) -> float:
    """RMSE of ``f(x) - y`` over all pooled points; ``None`` means identity."""
    xs, ys = _pooled(traces)
    if xs.size == 0:
        raise InsufficientData("no points to evaluate")
    if rescaler is None:
        pred = xs
    else:
        pred = np.array([evaluate(rescaler, x) for x in xs])
    return float(np.sqrt(np.mean((pred - ys) ** 2)))


def write_trace_csv(trace: DiffTrace, path) -> None:
    prov = " ".join(f"{k}={trace.provenance[k]}" for k in sorted(trace.provenance))
    with open(Path(path), "w", newline="") as fh:
        fh.write(f"# {prov}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for s, x, y in zip(trace.steps, trace.xs, trace.ys):
            w.writerow([s, repr(float(x)), repr(float(y))])


def read_trace_csv(path) -> DiffTrace:
    lines = Path(path).read_text().splitlines()
    prov = {}
    body = []
    for line in lines:
        if line.startswith("#"):
            for item in line[1:].split():
                key, _, value = item.partition("=")
                prov[key] = value
        elif line.strip():
            body.append(line)
    rows = list(csv.reader(body))
    if not rows or rows[0] != TRACE_HEADER:
        raise FormatError(f"{path}: expected header {','.join(TRACE_HEADER)}")
    steps, xs, ys = [], [], []
    for row in rows[1:]:
        steps.append(int(row[0]))
        xs.append(float(row[1]))
        ys.append(float(row[2]))
    return DiffTrace(steps, xs, ys, prov)
