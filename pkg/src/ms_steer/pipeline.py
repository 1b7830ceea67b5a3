"""Glue between the sampler, the subset search and satisfaction scoring."""

from __future__ import annotations

from dataclasses import dataclass, replace

from . import engine, evaluate, msdata
from .constraints import ConstraintSet
from .potentials import PotentialParams
from .schedule import GuidanceSchedules
from .structure import Structure


@dataclass(frozen=True)
class SubsetCallbackConfig:
    # guided samples per candidate subset; the best-satisfying one is scored
    samples_per_subset: int = 3
    # one denoiser call at this noise level before scoring, which removes
    # guidance-induced distortion that a real model would not keep
    polish_sigma: float | None = 1.0

    def __post_init__(self):
        if self.samples_per_subset < 1:
            raise ValueError("samples_per_subset must be >= 1")
        if self.polish_sigma is not None and self.polish_sigma <= 0:
            raise ValueError("polish_sigma must be positive")


def subset_callbacks(denoiser, template: Structure, params: PotentialParams = PotentialParams(),
                     schedules: GuidanceSchedules = GuidanceSchedules(),
                     sampler: engine.SamplerConfig | None = None,
                     cb: SubsetCallbackConfig = SubsetCallbackConfig(), **sasa_kw):
    """``(generate, evaluate)`` callbacks for :func:`msdata.subset_search`."""
    sampler = sampler or engine.SamplerConfig()

    def score(model: Structure, sub: ConstraintSet) -> float:
        overall = evaluate.satisfaction(model, sub, **sasa_kw).overall
        return 0.0 if overall is None else overall / 100.0

    def generate(sub: ConstraintSet, seed: int) -> Structure:
        best = None
        for k in range(cb.samples_per_subset):
            cfg = replace(sampler, seed=seed * cb.samples_per_subset + k, record_trajectory=False)
            res = engine.reverse_sample(denoiser, template, sub, params, schedules, cfg)
            x = res.coords
            if cb.polish_sigma is not None:
                x = denoiser.predict_x0(x, cb.polish_sigma)
            model = template.with_coords(x)
            s = score(model, sub)
            if best is None or s > best[0]:
                best = (s, model)
        return best[1]

    return generate, score


def run_subset_search(pool: ConstraintSet, denoiser, template: Structure,
                      params: PotentialParams = PotentialParams(),
                      schedules: GuidanceSchedules = GuidanceSchedules(),
                      sampler: engine.SamplerConfig | None = None,
                      search: msdata.SubsetConfig = msdata.SubsetConfig(),
                      cb: SubsetCallbackConfig = SubsetCallbackConfig()):
    gen, ev = subset_callbacks(denoiser, template, params, schedules, sampler, cb)
    return msdata.subset_search(pool, gen, ev, search)
