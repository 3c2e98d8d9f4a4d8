"""Timestep-embedding-aware output caching for a toy diffusion transformer."""

from .baselines import ScheduleSet, oracle_schedule, run_reduced_timesteps, run_uniform, uniform_cache_schedule
from .calibration import DiffTrace, fit_polynomial, fit_residual, record_trace
from .model import REFERENCE_CONFIG, ModelConfig, ModelWeights, forward, init_weights, timestep_embedding
from .policy import (
    CacheState,
    Decision,
    IndicatorMode,
    PolicyConfig,
    RunStats,
    TeaCachePolicy,
    accumulate_and_decide,
)
from .rescaler import PolyRescaler, evaluate
from .sampler import NoiseSchedule, SamplerConfig, linear_beta_schedule, run_sampler
from .tensor import l1_norm, rel_l1_distance

__all__ = [
    "CacheState",
    "Decision",
    "DiffTrace",
    "IndicatorMode",
    "ModelConfig",
    "ModelWeights",
    "NoiseSchedule",
    "PolicyConfig",
    "PolyRescaler",
    "REFERENCE_CONFIG",
    "RunStats",
    "SamplerConfig",
    "ScheduleSet",
    "TeaCachePolicy",
    "accumulate_and_decide",
    "evaluate",
    "fit_polynomial",
    "fit_residual",
    "forward",
    "init_weights",
    "l1_norm",
    "linear_beta_schedule",
    "oracle_schedule",
    "record_trace",
    "rel_l1_distance",
    "run_reduced_timesteps",
    "run_sampler",
    "run_uniform",
    "timestep_embedding",
    "uniform_cache_schedule",
]
