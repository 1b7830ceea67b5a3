"""Piecewise guidance weights over diffusion time.

Time runs from ``t = 1`` (pure noise) to ``t = 0`` (clean structure).  Stages
are upper-inclusive intervals ``(t_low, t_high]``; the last stage also owns
``t = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


class ScheduleDomainError(ValueError):
    pass


@dataclass(frozen=True)
class Stage:
    t_low: float
    t_high: float
    weight: float


@dataclass(frozen=True)
class StageSchedule:
    stages: tuple[Stage, ...]
    eval_interval: int = 1

    def __post_init__(self):
        st = sorted(self.stages, key=lambda s: s.t_low)
        object.__setattr__(self, "stages", tuple(st))
        if not st or st[0].t_low != 0.0 or st[-1].t_high != 1.0:
            raise ValueError("stages must cover [0, 1]")
        for a, b in zip(st, st[1:]):
            if a.t_high != b.t_low:
                raise ValueError(f"stage gap/overlap at t={a.t_high} vs {b.t_low}")
        for s in st:
            if not (s.t_low < s.t_high) or not math.isfinite(s.weight) or s.weight < 0:
                raise ValueError(f"bad stage {s}")
        if int(self.eval_interval) != self.eval_interval or self.eval_interval < 1:
            raise ValueError("eval_interval must be a positive integer")

    def weight(self, t: float) -> float:
        if not 0.0 <= t <= 1.0:
            raise ScheduleDomainError(f"t={t} outside [0, 1]")
        for s in self.stages:
            if t <= s.t_high:
                return s.weight
        return self.stages[-1].weight  # unreachable: last t_high == 1

    def to_dict(self) -> dict:
        return {
            "stages": [[s.t_low, s.t_high, s.weight] for s in self.stages],
            "eval_interval": self.eval_interval,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StageSchedule":
        return cls(tuple(Stage(float(a), float(b), float(w)) for a, b, w in d["stages"]),
                   int(d["eval_interval"]))


@dataclass(frozen=True)
class LambdaInterp:
    start: float = 8.0
    end: float = 0.0
    alpha: float = -2.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.start, self.end, self.alpha)) or self.alpha == 0:
            raise ValueError("start/end/alpha must be finite and alpha non-zero")

    def to_dict(self) -> dict:
        return {"start": self.start, "end": self.end, "alpha": self.alpha}


HDX_SCHEDULE = StageSchedule((Stage(0.0, 0.7, 2.0), Stage(0.7, 0.95, 0.5), Stage(0.95, 1.0, 0.0)), 1)
XL_SCHEDULE = StageSchedule((Stage(0.0, 0.25, 1.0), Stage(0.25, 0.75, 0.5), Stage(0.75, 1.0, 0.0)), 4)


def hdx_weight(t: float) -> float:
    """Absolute HDX guidance weight: 0 early, 0.5, then 2.0 near the end."""
    return HDX_SCHEDULE.weight(t)


def xl_weight_fraction(t: float) -> float:
    """Fraction of the base cross-link weight applied at time ``t``."""
    return XL_SCHEDULE.weight(t)


def should_apply(step_index: int, eval_interval: int) -> bool:
    return step_index % eval_interval == 0


def union_lambda(s: float, interp: LambdaInterp = LambdaInterp()) -> float:
    """Normalised exponential ramp from ``interp.start`` (s=0) to ``interp.end`` (s=1).

    ``s`` is reverse-diffusion progress: 0 at pure noise, 1 at the end.
    """
    if s <= 0.0:
        return interp.start
    if s >= 1.0:
        return interp.end
    a = interp.alpha
    return interp.start + (interp.end - interp.start) * (1.0 - math.exp(a * s)) / (1.0 - math.exp(a))


@dataclass(frozen=True)
class GuidanceSchedules:
    """Everything the sampler needs to turn time into per-family weights."""

    hdx: StageSchedule = HDX_SCHEDULE
    xl: StageSchedule = XL_SCHEDULE
    xl_base_weight: float = 2.0
    union: LambdaInterp = field(default_factory=LambdaInterp)

    def to_dict(self) -> dict:
        return {
            "hdx": self.hdx.to_dict(),
            "xl": self.xl.to_dict(),
            "xl_base_weight": self.xl_base_weight,
            "union_lambda": self.union.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GuidanceSchedules":
        return cls(
            hdx=StageSchedule.from_dict(d["hdx"]),
            xl=StageSchedule.from_dict(d["xl"]),
            xl_base_weight=float(d["xl_base_weight"]),
            union=LambdaInterp(**d["union_lambda"]),
        )
