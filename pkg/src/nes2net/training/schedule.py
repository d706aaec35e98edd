"""Cyclic cosine learning-rate schedule (restarts at the top of every cycle)."""
from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class CosineCycleSchedule:
    eta_max: float = 1e-6
    eta_min: float = 1e-9
    cycle_length: float = 10

    def __post_init__(self):
        if self.eta_min > self.eta_max:
            raise ValueError("eta_min must not exceed eta_max")
        if self.cycle_length <= 0:
            raise ValueError("cycle_length must be positive")

    def lr_at(self, epoch: float) -> float:
        if epoch < 0:
            raise ValueError("epoch must be >= 0")
        phase = math.fmod(epoch, self.cycle_length) / self.cycle_length
        return self.eta_min + (self.eta_max - self.eta_min) * (1 + math.cos(math.pi * phase)) / 2

    def min_lr_epochs(self, epochs: int) -> list[int]:
        """Integer epochs (< ``epochs``) closest to each cycle's minimum."""
        lrs = [self.lr_at(e) for e in range(epochs)]
        return [e for e in range(epochs)
                if (e == epochs - 1 or lrs[e + 1] > lrs[e]) and (e == 0 or lrs[e - 1] > lrs[e])]


def lr_at(schedule: CosineCycleSchedule, epoch: float) -> float:
    return schedule.lr_at(epoch)
