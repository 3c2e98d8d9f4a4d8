"""Experiment configuration read from an INI-style ``key = value`` file.

Every key is optional; missing keys take the defaults below.

    [model]     token_count=16 channel_dim=8 hidden_dim=32 num_blocks=4
                num_heads=4 cond_dim=8 weight_seed=42
    [schedule]  steps=30 beta_start=0.01 beta_end=0.3
    [policy]    delta=0.1 mode=modulated_input order=4
                rescaler=none        # none | auto | path to a rescaler file
    [run]       seeds=0-7            # comma list and/or inclusive ranges
                cond_seed=0 output_dir=teacache_out
                methods=baseline,teacache   # also: uniform, reduced
                uniform_interval=2 reduced_steps=15
                grid=16x8            # 2-D view of the latent for SSIM
                trajectory=false
    [sweep]     deltas=0,0.05,0.1,0.15,0.2,0.25,0.3

``rescaler = auto`` means ``<output_dir>/rescaler_<mode>.json`` as written by
``calibrate``. Relative paths resolve against the config file's directory.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

from .baselines import LinearScheduleSpec
from .calibration import DEFAULT_ORDER
from .errors import ConfigError
from .model import ModelConfig
from .policy import IndicatorMode

METHODS = ("baseline", "teacache", "uniform", "reduced")
DEFAULT_DELTAS = (0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3)


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    schedule: LinearScheduleSpec = field(default_factory=LinearScheduleSpec)
    delta: float = 0.1
    mode: IndicatorMode = IndicatorMode.MODULATED_INPUT
    order: int = DEFAULT_ORDER
    rescaler: str = "none"
    seeds: tuple[int, ...] = tuple(range(8))
    cond_seed: int = 0
    output_dir: Path = Path("teacache_out")
    methods: tuple[str, ...] = ("baseline", "teacache")
    uniform_interval: int = 2
    reduced_steps: int | None = None
    grid: tuple[int, int] = (16, 8)
    trajectory: bool = False
    deltas: tuple[float, ...] = DEFAULT_DELTAS
    base_dir: Path = Path(".")

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.delta < 0:
            raise ConfigError("delta must be nonnegative")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown methods {bad}; choose from {list(METHODS)}")
        check_delta_grid(self.deltas)

    @property
    def reduced(self) -> int:
        return self.reduced_steps if self.reduced_steps is not None else max(2, self.schedule.T // 2)

    def rescaler_path(self) -> Path | None:
        key = self.rescaler.strip()
        if key.lower() == "none":
            return None
        if key.lower() == "auto":
            return self.output_dir / f"rescaler_{self.mode.value}.json"
        p = Path(key)
        return p if p.is_absolute() else self.base_dir / p

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)


def check_delta_grid(deltas) -> None:
    if not deltas:
        raise ConfigError("delta grid is empty")
    if any(d < 0 for d in deltas):
        raise ConfigError("delta grid entries must be nonnegative")
    if any(b <= a for a, b in zip(deltas, deltas[1:])):
        raise ConfigError("delta grid must be strictly increasing")


def parse_int_list(text: str) -> tuple[int, ...]:
    out = []
    for part in text.replace(" ", "").split(","):
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return tuple(out)


def parse_float_list(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in text.replace(" ", "").split(",") if p)


def _bool(text: str) -> bool:
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _grid(text: str) -> tuple[int, int]:
    parts = text.lower().replace(" ", "").split("x")
    if len(parts) != 2:
        raise ConfigError(f"grid must look like ROWSxCOLS, got {text!r}")
    return int(parts[0]), int(parts[1])


def load_config(path=None) -> ExperimentConfig:
    """Read ``path`` (or return the defaults when ``path`` is None)."""
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    base_dir = path.resolve().parent

    try:
        m = parser["model"] if parser.has_section("model") else {}
        d = ModelConfig()
        model = ModelConfig(
            token_count=int(m.get("token_count", d.token_count)),
            channel_dim=int(m.get("channel_dim", d.channel_dim)),
            hidden_dim=int(m.get("hidden_dim", d.hidden_dim)),
            num_blocks=int(m.get("num_blocks", d.num_blocks)),
            num_heads=int(m.get("num_heads", d.num_heads)),
            cond_dim=int(m.get("cond_dim", d.cond_dim)),
            weight_seed=int(m.get("weight_seed", d.weight_seed)),
        )
        s = parser["schedule"] if parser.has_section("schedule") else {}
        ds = LinearScheduleSpec()
        schedule = LinearScheduleSpec(
            T=int(s.get("steps", ds.T)),
            beta_start=float(s.get("beta_start", ds.beta_start)),
            beta_end=float(s.get("beta_end", ds.beta_end)),
        )
        p = parser["policy"] if parser.has_section("policy") else {}
        r = parser["run"] if parser.has_section("run") else {}
        sw = parser["sweep"] if parser.has_section("sweep") else {}
        defaults = ExperimentConfig()
        out_dir = Path(r.get("output_dir", str(defaults.output_dir)))
        if not out_dir.is_absolute():
            out_dir = base_dir / out_dir
        reduced = r.get("reduced_steps")
        return ExperimentConfig(
            model=model,
            schedule=schedule,
            delta=float(p.get("delta", defaults.delta)),
            mode=IndicatorMode.parse(p.get("mode", defaults.mode.value)),
            order=int(p.get("order", defaults.order)),
            rescaler=p.get("rescaler", defaults.rescaler),
            seeds=parse_int_list(r.get("seeds", "0-7")),
            cond_seed=int(r.get("cond_seed", defaults.cond_seed)),
            output_dir=out_dir,
            methods=tuple(x.strip() for x in r.get("methods", ",".join(defaults.methods)).split(",") if x.strip()),
            uniform_interval=int(r.get("uniform_interval", defaults.uniform_interval)),
            reduced_steps=None if reduced is None else int(reduced),
            grid=_grid(r.get("grid", "16x8")),
            trajectory=_bool(r.get("trajectory", "false")),
            deltas=parse_float_list(sw.get("deltas", ",".join(map(str, DEFAULT_DELTAS)))),
            base_dir=base_dir,
        )
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
