"""One-cycle learning-rate schedule: cosine warm-up to a peak, then cosine decay."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class OneCycleSchedule:
    lr_start: float
    lr_max: float
    total_steps: int
    pct_start: float = 0.3
    final_div: float = 1e4

    def __post_init__(self):
        if not 0 < self.lr_start < self.lr_max:
            raise ValueError(f"need 0 < lr_start < lr_max, got {self.lr_start}, {self.lr_max}")
        if self.total_steps < 0:
            raise ValueError("total_steps must be non-negative")
        if not 0 < self.pct_start < 1:
            raise ValueError("pct_start must lie in (0, 1)")

    @property
    def peak_step(self) -> int:
        return max(1, round(self.pct_start * (self.total_steps - 1))) if self.total_steps > 1 else 0

    def lr(self, step: int) -> float:
        if self.total_steps <= 1 or step <= 0:
            return self.lr_start
        step = min(step, self.total_steps - 1)
        peak = self.peak_step
        if step == peak:
            return self.lr_max
        if step < peak:
            frac = step / peak
            return self.lr_start + (self.lr_max - self.lr_start) * (1 - math.cos(math.pi * frac)) / 2
        lr_end = self.lr_start / self.final_div
        frac = (step - peak) / (self.total_steps - 1 - peak)
        return lr_end + (self.lr_max - lr_end) * (1 + math.cos(math.pi * frac)) / 2

    def values(self) -> list[float]:
        return [self.lr(t) for t in range(self.total_steps)]
