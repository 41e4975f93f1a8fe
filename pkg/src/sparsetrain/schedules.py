"""Learning-rate schedules: linear warmup, then step/inverse/cosine decay.

A schedule can be stretched by a factor ``t >= 1``: warmup is unchanged, and
post-warmup progress advances at rate ``1/t``, so every decay milestone lands
at ``t`` times its original step and an inverse schedule ``1/u`` turns into
``t/u``.  ``total_steps`` is the length of the (already stretched) run; the
reference span of the unstretched schedule is ``(total_steps - warmup) / t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError

DECAY_KINDS = ("step", "inverse", "cosine", "constant")


@dataclass(frozen=True)
class LrSchedule:
    base_lr: float
    total_steps: int
    warmup_steps: int = 0
    decay: str = "step"
    milestones: tuple[float, ...] = (0.5, 0.75)
    drop_factor: float = 0.1
    stretch: float = 1.0

    def __post_init__(self):
        if self.base_lr < 0:
            raise ConfigError(f"base_lr must be >= 0, got {self.base_lr}")
        if self.decay not in DECAY_KINDS:
            raise ConfigError(f"unknown decay kind {self.decay!r}, expected one of {DECAY_KINDS}")
        if self.warmup_steps < 0:
            raise ConfigError("warmup_steps must be >= 0")
        if self.total_steps < self.warmup_steps:
            raise ConfigError(
                f"total_steps ({self.total_steps}) must cover warmup ({self.warmup_steps})"
            )
        if self.stretch < 1.0:
            raise ConfigError(f"stretch must be >= 1, got {self.stretch}")
        if not all(0.0 <= m <= 1.0 for m in self.milestones):
            raise ConfigError("milestones must be fractions in [0, 1]")
        if not 0.0 < self.drop_factor <= 1.0:
            raise ConfigError("drop_factor must be in (0, 1]")


def lr_at(schedule: LrSchedule, step: int) -> float:
    """Learning rate at a 0-based step: 0 at step 0, base_lr at step == warmup."""
    if step < 0:
        raise ValueError(f"step must be >= 0, got {step}")
    s = schedule
    if s.warmup_steps > 0 and step < s.warmup_steps:
        return s.base_lr * step / s.warmup_steps
    # Post-warmup progress in unstretched units.
    u = (step - s.warmup_steps) / s.stretch
    span = (s.total_steps - s.warmup_steps) / s.stretch
    if s.decay == "constant":
        return s.base_lr
    if s.decay == "step":
        drops = sum(1 for m in s.milestones if u >= m * span)
        return s.base_lr * s.drop_factor**drops
    if s.decay == "inverse":
        return s.base_lr / (1.0 + u)
    # cosine
    frac = 1.0 if span <= 0 else min(u / span, 1.0)
    return s.base_lr * 0.5 * (1.0 + math.cos(math.pi * frac))
