"""Run configuration: strict JSON loading, defaults, and round-tripping.

All keys are documented by the dataclass fields below; unknown keys raise
ConfigError naming the key (no silent typo tolerance).  A minimal config is
just ``{"task": {"kind": "spiral_classification"}, "policy": {"method":
"search"}}`` — everything else has a default.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .errors import ConfigError
from .policy import SparsityPolicy
from .tasks import TaskSpec


@dataclass(frozen=True)
class ScheduleSpec:
    base_lr: float = 0.12
    warmup_steps: int = 100
    decay: str = "step"
    milestones: tuple[float, ...] = (0.5, 0.8)
    drop_factor: float = 0.1
    stretch: float = 1.0


@dataclass(frozen=True)
class RunConfig:
    task: TaskSpec = field(default_factory=TaskSpec)
    policy: SparsityPolicy = field(default_factory=SparsityPolicy)
    schedule: ScheduleSpec = field(default_factory=ScheduleSpec)
    hidden_widths: tuple[int, ...] = (64, 64)
    activation: str = "relu"
    total_steps: int = 2000
    momentum: float = 0.9
    snapshot_stride: int = 50
    snapshot_max_tracked: int | None = 4096
    seed: int = 0
    dtype: str = "float32"
    output_dir: str = "runs/out"

    def __post_init__(self):
        if self.total_steps < 1:
            raise ConfigError("total_steps must be >= 1")
        if self.total_steps < self.schedule.warmup_steps:
            raise ConfigError(
                f"total_steps ({self.total_steps}) must be >= warmup_steps "
                f"({self.schedule.warmup_steps})"
            )
        if self.snapshot_stride < 1:
            raise ConfigError("snapshot_stride must be >= 1")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"dtype must be float32 or float64, got {self.dtype!r}")
        if self.activation not in ("relu", "tanh"):
            raise ConfigError(f"activation must be relu or tanh, got {self.activation!r}")
        if not self.hidden_widths or any(h < 1 for h in self.hidden_widths):
            raise ConfigError("hidden_widths must be non-empty positive counts")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        if self.snapshot_max_tracked is not None and self.snapshot_max_tracked < 1:
            raise ConfigError("snapshot_max_tracked must be >= 1 or null")


def _build(cls, data: dict, ctx: str):
    """Construct a (possibly nested) config dataclass strictly from a dict."""
    if not isinstance(data, dict):
        raise ConfigError(f"section '{ctx}' must be an object, got {type(data).__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    for key in sorted(set(data) - set(fields)):
        raise ConfigError(f"unknown config key '{ctx}.{key}'" if ctx else f"unknown config key '{key}'")
    kwargs = {}
    nested = {"task": TaskSpec, "policy": SparsityPolicy, "schedule": ScheduleSpec}
    for name, value in data.items():
        sub = ctx + "." + name if ctx else name
        if name in nested and cls is RunConfig:
            kwargs[name] = _build(nested[name], value, sub)
        elif isinstance(value, list):
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value in section '{ctx or 'config'}': {exc}") from exc


def config_from_dict(data: dict, source: str = "") -> RunConfig:
    try:
        return _build(RunConfig, data, "")
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}" if source else str(exc)) from None


def load_config(path) -> RunConfig:
    """Parse a JSON config file; unknown keys and bad values raise ConfigError."""
    with open(path) as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return config_from_dict(data, source=str(path))


def config_to_dict(cfg: RunConfig) -> dict:
    """JSON-ready dict with every key explicit (tuples become lists)."""

    def clean(obj):
        if dataclasses.is_dataclass(obj):
            return {f.name: clean(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
        if isinstance(obj, tuple):
            return [clean(v) for v in obj]
        return obj

    return clean(cfg)


def save_config(cfg: RunConfig, path) -> None:
    with open(path, "w") as f:
        json.dump(config_to_dict(cfg), f, indent=2, sort_keys=True)
        f.write("\n")
