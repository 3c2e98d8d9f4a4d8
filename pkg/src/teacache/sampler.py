"""Noise schedules and the deterministic reverse-process loop.

Step indices run ``T-1, ..., 0`` in execution order. Step ``s`` denoises from
diffusion time ``t = s + 1`` to ``t = s``, so ``alphas[s]`` is the
coefficient of time ``s + 1`` and the last step returns the clean estimate.
The model receives ``s * time_scale`` as its timestep.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import model as dit
from . import rng
from .errors import BadRange
from .policy import CachePolicy, Decision, RunStats
from .tensor import Tensor, as_tensor, check_same_shape, frozen, rel_l1_distance

TRAJECTORY_HEADER = ["t", "decision", "indicator_diff", "rescaled_diff", "accumulator", "true_output_diff"]


@dataclass(frozen=True)
class NoiseSchedule:
    alphas: np.ndarray
    alpha_bars: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        alphas = frozen(np.array(self.alphas, dtype=np.float64))
        bars = frozen(np.array(self.alpha_bars, dtype=np.float64))
        if alphas.ndim != 1 or alphas.shape != bars.shape:
            raise BadRange("alphas and alpha_bars must be 1-D arrays of equal length")
        if not np.all((alphas > 0) & (alphas < 1)):
            raise BadRange("every alpha must lie in (0, 1)")
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "alpha_bars", bars)

    @property
    def T(self) -> int:
        return len(self.alphas)

    @classmethod
    def from_alphas(cls, alphas, name: str = "custom") -> "NoiseSchedule":
        alphas = np.asarray(alphas, dtype=np.float64)
        return cls(alphas, np.cumprod(alphas), name)

    def alpha_bar(self, t: int) -> float:
        """Cumulative product at diffusion time ``t``; time 0 is clean (1.0)."""
        return 1.0 if t == 0 else float(self.alpha_bars[t - 1])


def linear_beta_schedule(T: int, beta_start: float, beta_end: float) -> NoiseSchedule:
    if T < 2:
        raise BadRange(f"need at least 2 steps, got {T}")
    if not 0 < beta_start <= beta_end < 1:
        raise BadRange(f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}")
    betas = np.linspace(beta_start, beta_end, T)
    return NoiseSchedule.from_alphas(1.0 - betas, name=f"linear-T{T}-{beta_start!r}-{beta_end!r}")


def forward_diffuse(x_prev, t: int, schedule: NoiseSchedule, noise) -> Tensor:
    x_prev, noise = as_tensor(x_prev), as_tensor(noise)
    check_same_shape(x_prev, noise)
    if not 1 <= t <= schedule.T:
        raise BadRange(f"t must be in [1, {schedule.T}], got {t}")
    a = schedule.alphas[t - 1]
    return np.sqrt(a) * x_prev + np.sqrt(1.0 - a) * noise


def predict_x0(x_t, eps, t: int, schedule: NoiseSchedule) -> Tensor:
    ab = schedule.alpha_bar(t)
    return (x_t - np.sqrt(1.0 - ab) * eps) / np.sqrt(ab)


def denoise_step(x_t, model_output, t: int, schedule: NoiseSchedule) -> Tensor:
    """Deterministic (eta = 0) update from time ``t`` to ``t - 1``."""
    x_t, eps = as_tensor(x_t), as_tensor(model_output)
    check_same_shape(x_t, eps)
    if not 1 <= t <= schedule.T:
        raise BadRange(f"t must be in [1, {schedule.T}], got {t}")
    x0 = predict_x0(x_t, eps, t, schedule)
    if t == 1:
        return x0
    ab_prev = schedule.alpha_bar(t - 1)
    return np.sqrt(ab_prev) * x0 + np.sqrt(1.0 - ab_prev) * eps


@dataclass(frozen=True)
class SamplerConfig:
    schedule: NoiseSchedule
    noise_seed: int = 0
    record_trajectory: bool = False
    time_scale: float = 1.0

    def __post_init__(self):
        if self.schedule.T < 2:
            raise BadRange("sampler needs T >= 2")


@dataclass(frozen=True)
class StepRecord:
    t: int
    x_t: Tensor
    output: Tensor
    decision: Decision
    indicator_diff: float | None
    rescaled_diff: float | None
    accumulator: float | None
    true_output_diff: float | None


class SampleResult(NamedTuple):
    latent: Tensor
    stats: RunStats
    trajectory: list[StepRecord] | None


def initial_latent(config: dit.ModelConfig, noise_seed: int) -> Tensor:
    return frozen(rng.gaussian_tensor(noise_seed, config.latent_shape))


def default_condition(config: dit.ModelConfig, cond_seed: int = 0) -> Tensor:
    """The fixed conditioning vector shared by every step of a run."""
    return frozen(rng.gaussian_tensor(cond_seed, (config.cond_dim,)))


def run_sampler(
    weights: dit.ModelWeights,
    config: SamplerConfig,
    policy: CachePolicy | None = None,
    cond=None,
    x_T=None,
) -> SampleResult:
    """Denoise from ``x_T`` (drawn from ``config.noise_seed`` unless given).

    Without a policy every step runs the model. With one, the policy decides
    per step; the first step always runs the model.
    """
    mcfg = weights.config
    schedule = config.schedule
    cond = default_condition(mcfg) if cond is None else as_tensor(cond)
    x = initial_latent(mcfg, config.noise_seed) if x_T is None else as_tensor(x_T)
    stats = RunStats(steps=schedule.T, noise_seed=config.noise_seed, flops_per_eval=dit.forward_flops(mcfg))
    trajectory = [] if config.record_trajectory else None
    if policy is not None:
        policy.reset()
    prev_out = None

    for s in range(schedule.T - 1, -1, -1):
        model_t = s * config.time_scale
        emb = dit.timestep_embedding(weights, model_t)
        if policy is None:
            info_diff = info_rescaled = info_acc = None
            decision = Decision.REFRESH
        else:
            info = policy.decide(weights, x, s, model_t, emb, cond)
            decision, info_diff, info_rescaled, info_acc = info
            if s == schedule.T - 1 and decision is not Decision.REFRESH:
                raise RuntimeError("policy must refresh on the first reverse step")

        true_diff = None
        if decision is Decision.REFRESH:
            out = dit.forward(weights, x, emb, cond) if policy is None else policy.compute(weights, x, s, emb, cond)
            stats.total_model_evals += 1
            if prev_out is not None:
                true_diff = rel_l1_distance(out, prev_out)
            prev_out = out
        else:
            out = policy.reuse(x)
        stats.per_step_decisions.append((s, decision))

        if trajectory is not None:
            trajectory.append(StepRecord(s, x, out, decision, info_diff, info_rescaled, info_acc, true_diff))
        x = frozen(denoise_step(x, out, s + 1, schedule))

    return SampleResult(x, stats, trajectory)


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def write_trajectory_csv(trajectory: list[StepRecord], path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_HEADER)
        for r in trajectory:
            w.writerow([r.t, r.decision.value, _fmt(r.indicator_diff), _fmt(r.rescaled_diff), _fmt(r.accumulator), _fmt(r.true_output_diff)])
