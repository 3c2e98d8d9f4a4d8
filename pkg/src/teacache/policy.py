"""Refresh-or-reuse decisions driven by accumulated input differences.

At each denoising step a cheap indicator (timestep embedding, noisy latent, or
the block-0 modulated input) is compared with the indicator of the previous
step by relative L1 distance. Optionally rescaled by a fitted polynomial, the
per-step differences are summed since the last refresh. The model is re-run
once that sum exceeds ``delta``; otherwise the residual ``output - input``
cached at the last refresh is added to the current latent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np

from . import model as dit
from .errors import NoCachedResidual
from .rescaler import PolyRescaler
from .tensor import Tensor, as_tensor, frozen, rel_l1_distance, rel_l1_validated


class IndicatorMode(str, Enum):
    TIMESTEP_EMBEDDING = "timestep_embedding"
    NOISY_INPUT = "noisy_input"
    MODULATED_INPUT = "modulated_input"

    @classmethod
    def parse(cls, value) -> "IndicatorMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            choices = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown indicator mode {value!r}; expected one of {choices}") from None


class Decision(str, Enum):
    REFRESH = "computed"
    REUSE = "reused"


@dataclass(frozen=True)
class PolicyConfig:
    delta: float
    mode: IndicatorMode = IndicatorMode.MODULATED_INPUT
    rescaler: PolyRescaler | None = None

    def __post_init__(self):
        if not self.delta >= 0:
            raise ValueError(f"delta must be nonnegative, got {self.delta}")
        object.__setattr__(self, "mode", IndicatorMode.parse(self.mode))


@dataclass
class CacheState:
    cached_residual: Tensor | None = None
    accumulator: float = 0.0
    prev_indicator: Tensor | None = None
    last_computed_step: int | None = None
    # bookkeeping from the most recent decision, for trajectories
    last_diff: float | None = None
    last_rescaled: float | None = None


@dataclass
class RunStats:
    steps: int
    noise_seed: int | None = None
    flops_per_eval: int = 0
    per_step_decisions: list[tuple[int, Decision]] = field(default_factory=list)
    total_model_evals: int = 0

    @property
    def computed_steps(self) -> int:
        return sum(1 for _, d in self.per_step_decisions if d is Decision.REFRESH)

    @property
    def reused_steps(self) -> int:
        return sum(1 for _, d in self.per_step_decisions if d is Decision.REUSE)

    @property
    def flops_proxy(self) -> int:
        return self.total_model_evals * self.flops_per_eval

    @property
    def computed_set(self) -> frozenset[int]:
        return frozenset(t for t, d in self.per_step_decisions if d is Decision.REFRESH)


def accumulate_step(accumulator: float, diff: float, delta: float, rescaler: PolyRescaler | None = None):
    """One update of the accumulator recursion.

    Returns ``(refresh, new_accumulator, rescaled_diff)``. Rescaled values are
    clamped at zero. Reuse holds while the running sum stays ``<= delta``.
    """
    r = diff if rescaler is None else rescaler(diff)
    r = max(r, 0.0)
    tentative = accumulator + r
    if tentative <= delta:
        return False, tentative, r
    return True, 0.0, r


def accumulate_and_decide(state: CacheState, indicator, config: PolicyConfig) -> Decision:
    indicator = as_tensor(indicator)
    if state.prev_indicator is None:
        state.prev_indicator = indicator
        state.accumulator = 0.0
        state.last_diff = state.last_rescaled = None
        return Decision.REFRESH
    d = rel_l1_validated(indicator, state.prev_indicator)
    refresh, state.accumulator, r = accumulate_step(state.accumulator, d, config.delta, config.rescaler)
    state.prev_indicator = indicator
    state.last_diff, state.last_rescaled = d, r
    return Decision.REFRESH if refresh else Decision.REUSE


def indicator_value(weights: dit.ModelWeights, x_t, t: float, mode, *, cond=None, emb=None) -> Tensor:
    """The per-step signal whose differences drive caching.

    ``cond`` is required for the modulated-input mode; ``emb`` may be passed to
    avoid recomputing the timestep embedding.
    """
    mode = IndicatorMode.parse(mode)
    if mode is IndicatorMode.NOISY_INPUT:
        return frozen(as_tensor(x_t, copy=True))
    if emb is None:
        emb = dit.timestep_embedding(weights, t)
    if mode is IndicatorMode.TIMESTEP_EMBEDDING:
        return emb
    if cond is None:
        raise ValueError("modulated-input indicator needs the conditioning vector")
    return dit.first_block_modulated_input(weights, x_t, emb, cond)


def compute_and_cache(weights: dit.ModelWeights, x_t, emb, cond, state: CacheState, t: int | None = None) -> Tensor:
    out = dit.forward(weights, x_t, emb, cond)
    state.cached_residual = frozen(out - as_tensor(x_t))
    state.last_computed_step = t
    return out


def apply_cached(x_t, state: CacheState) -> Tensor:
    if state.cached_residual is None:
        raise NoCachedResidual("reuse requested before any model evaluation")
    return frozen(as_tensor(x_t) + state.cached_residual)


class StepInfo(NamedTuple):
    decision: Decision
    indicator_diff: float | None = None
    rescaled_diff: float | None = None
    accumulator: float | None = None


class CachePolicy:
    """Residual cache shared by every schedule; subclasses choose the steps.

    A policy instance owns mutable state for one run at a time; the sampler
    calls :meth:`reset` before each run.
    """

    def __init__(self, mode=None):
        self.mode = None if mode is None else IndicatorMode.parse(mode)
        self.state = CacheState()

    def reset(self) -> None:
        self.state = CacheState()

    def _indicator_diff(self, weights, x_t, t, emb, cond) -> float | None:
        if self.mode is None:
            return None
        ind = indicator_value(weights, x_t, t, self.mode, cond=cond, emb=emb)
        prev, self.state.prev_indicator = self.state.prev_indicator, ind
        return None if prev is None else rel_l1_distance(ind, prev)

    def decide(self, weights, x_t, t: int, model_t: float, emb, cond) -> StepInfo:
        raise NotImplementedError

    def compute(self, weights, x_t, t: int, emb, cond) -> Tensor:
        return compute_and_cache(weights, x_t, emb, cond, self.state, t)

    def reuse(self, x_t) -> Tensor:
        return apply_cached(x_t, self.state)


class TeaCachePolicy(CachePolicy):
    def __init__(self, config: PolicyConfig):
        super().__init__(config.mode)
        self.config = config

    def decide(self, weights, x_t, t, model_t, emb, cond) -> StepInfo:
        ind = indicator_value(weights, x_t, model_t, self.mode, cond=cond, emb=emb)
        decision = accumulate_and_decide(self.state, ind, self.config)
        s = self.state
        return StepInfo(decision, s.last_diff, s.last_rescaled, s.accumulator)


class FixedSchedulePolicy(CachePolicy):
    """Refresh exactly at ``computed_steps``; reuse the residual elsewhere.

    With ``mode`` set, indicator differences are still measured each step so
    trajectories of uncached runs carry calibration data.
    """

    def __init__(self, computed_steps, mode=None):
        super().__init__(mode)
        self.computed_steps = frozenset(int(s) for s in computed_steps)

    def decide(self, weights, x_t, t, model_t, emb, cond) -> StepInfo:
        diff = self._indicator_diff(weights, x_t, model_t, emb, cond)
        decision = Decision.REFRESH if t in self.computed_steps else Decision.REUSE
        return StepInfo(decision, diff, diff, None)


class AlwaysComputePolicy(FixedSchedulePolicy):
    def __init__(self, mode=None):
        super().__init__((), mode)

    def decide(self, weights, x_t, t, model_t, emb, cond) -> StepInfo:
        diff = self._indicator_diff(weights, x_t, model_t, emb, cond)
        return StepInfo(Decision.REFRESH, diff, diff, None)


def never_recompute_config(mode=IndicatorMode.MODULATED_INPUT) -> PolicyConfig:
    return PolicyConfig(delta=float(np.inf), mode=mode)
