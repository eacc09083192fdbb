"""Learning-rate schedules: cosine annealing, step decay, polynomial decay."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..errors import ConfigError, InvalidInputError


@dataclass(frozen=True)
class ScheduleSpec:
    kind: str                    # "cosine" | "step" | "polynomial"
    base_lr: float
    total_steps: int
    milestones: tuple = ()       # step kind: steps at which lr is multiplied by factor
    factor: float = 0.1
    power: float = 0.9           # polynomial kind
    min_lr: float = 0.0

    def __post_init__(self):
        if self.kind not in ("cosine", "step", "polynomial"):
            raise ConfigError(f"unknown schedule kind {self.kind!r}")
        if self.base_lr <= 0:
            raise ConfigError(f"base_lr must be > 0, got {self.base_lr}")
        if self.total_steps < 1:
            raise ConfigError(f"total_steps must be >= 1, got {self.total_steps}")
        if self.kind == "polynomial" and self.min_lr >= self.base_lr:
            raise ConfigError(
                f"polynomial min_lr {self.min_lr} must be below base_lr {self.base_lr}"
            )
        object.__setattr__(self, "milestones", tuple(self.milestones))


def lr_at(schedule: ScheduleSpec, step: int) -> float:
    """Learning rate at an integer step in [0, total_steps]."""
    if not 0 <= step <= schedule.total_steps:
        raise InvalidInputError(
            f"step {step} outside [0, {schedule.total_steps}]"
        )
    if schedule.kind == "cosine":
        return schedule.base_lr * 0.5 * (1.0 + math.cos(math.pi * step / schedule.total_steps))
    if schedule.kind == "step":
        passed = sum(1 for m in schedule.milestones if step >= m)
        return schedule.base_lr * schedule.factor ** passed
    frac = 1.0 - step / schedule.total_steps
    return (schedule.base_lr - schedule.min_lr) * frac ** schedule.power + schedule.min_lr


def lesion_detection_step_schedule(steps_per_epoch: int = 1, base_lr: float = 0.02) -> ScheduleSpec:
    """24-epoch step preset: lr divided by 10 after epochs 16 and 22."""
    return ScheduleSpec(
        kind="step",
        base_lr=base_lr,
        total_steps=24 * steps_per_epoch,
        milestones=(16 * steps_per_epoch, 22 * steps_per_epoch),
        factor=0.1,
    )
