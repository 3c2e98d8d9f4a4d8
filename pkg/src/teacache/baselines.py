"""Comparator schedules: uniform caching, fewer timesteps, and the output oracle."""

from __future__ import annotations

from dataclasses import dataclass

from . import model as dit
from .errors import BadInterval, BadRange
from .policy import FixedSchedulePolicy, accumulate_step
from .sampler import SampleResult, SamplerConfig, linear_beta_schedule, run_sampler


@dataclass(frozen=True)
class ScheduleSet:
    """Steps (in ``[0, T-1]``) at which the model is evaluated."""

    steps: frozenset[int]
    T: int

    def __post_init__(self):
        steps = frozenset(int(s) for s in self.steps)
        object.__setattr__(self, "steps", steps)
        if self.T - 1 not in steps:
            raise ValueError("a schedule must compute the first reverse step")
        if any(not 0 <= s < self.T for s in steps):
            raise ValueError(f"schedule steps must lie in [0, {self.T - 1}]")

    def __len__(self) -> int:
        return len(self.steps)

    def __contains__(self, step) -> bool:
        return step in self.steps

    def sorted(self) -> list[int]:
        return sorted(self.steps, reverse=True)


@dataclass(frozen=True)
class LinearScheduleSpec:
    T: int = 30
    beta_start: float = 0.01
    beta_end: float = 0.3

    def build(self, steps: int | None = None):
        return linear_beta_schedule(self.T if steps is None else steps, self.beta_start, self.beta_end)


def uniform_cache_schedule(T: int, interval: int) -> ScheduleSet:
    if not 1 <= interval <= T:
        raise BadInterval(f"interval must be in [1, {T}], got {interval}")
    return ScheduleSet(frozenset(range(T - 1, -1, -interval)), T)


def run_uniform(weights: dit.ModelWeights, config: SamplerConfig, interval: int, cond=None, mode=None) -> SampleResult:
    sched = uniform_cache_schedule(config.schedule.T, interval)
    return run_sampler(weights, config, FixedSchedulePolicy(sched.steps, mode), cond)


def run_reduced_timesteps(weights: dit.ModelWeights, x_T, T_reduced: int, cond, spec: LinearScheduleSpec, record_trajectory: bool = False) -> SampleResult:
    """Uncached run over ``T_reduced`` steps spanning the same beta range.

    The model timestep is stretched so that the reduced run covers the same
    timestep range ``[0, T-1]`` as the full schedule.
    """
    if not 2 <= T_reduced <= spec.T:
        raise BadRange(f"T_reduced must be in [2, {spec.T}], got {T_reduced}")
    schedule = spec.build(T_reduced)
    scale = (spec.T - 1) / (T_reduced - 1)
    cfg = SamplerConfig(schedule, noise_seed=0, record_trajectory=record_trajectory, time_scale=scale)
    return run_sampler(weights, cfg, None, cond, x_T=x_T)


def oracle_schedule(output_diffs, delta: float) -> ScheduleSet:
    """Schedule the accumulator would pick from the true output differences.

    ``output_diffs[i]`` is the difference between executed steps ``i`` and
    ``i + 1`` of an uncached run, so ``T = len(output_diffs) + 1``.
    """
    T = len(output_diffs) + 1
    computed = {T - 1}
    acc = 0.0
    for i, d in enumerate(output_diffs):
        refresh, acc, _ = accumulate_step(acc, float(d), delta)
        if refresh:
            computed.add(T - 2 - i)
    return ScheduleSet(frozenset(computed), T)
