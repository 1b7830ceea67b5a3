"""Reverse-diffusion sampler with restraint guidance.

Variance-exploding convention: ``x_sigma = x_0 + sigma * eps`` with zero drift.
The score is recovered from a denoiser's clean-structure prediction as
``(x0_hat - x) / sigma^2``.  Restraint gradients are evaluated on ``x0_hat``
and subtracted from the score with ``lambda = weight / sigma^2``, which makes
``weight`` the size of a gradient step applied to the denoised prediction.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Protocol

import numpy as np
from scipy.special import logsumexp

from . import schedule as sched
from .constraints import FAMILIES, ConstraintSet
from .potentials import CompiledConstraints, PotentialParams, check_weights
from .structure import Structure

XL_FAMILIES = ("xl_pos", "xl_neg")
HDX_FAMILIES = ("hdx_proxy", "hdx_burial")


class DivergenceError(RuntimeError):
    def __init__(self, step: int):
        self.step = step
        super().__init__(f"non-finite coordinates at step {step}")


@dataclass(frozen=True)
class NoiseSchedule:
    sigma_max: float = 160.0
    sigma_min: float = 0.05
    n_steps: int = 200

    def __post_init__(self):
        if not self.sigma_max > self.sigma_min > 0:
            raise ValueError("need sigma_max > sigma_min > 0")
        if self.n_steps < 2:
            raise ValueError("n_steps must be >= 2")

    def sigmas(self) -> np.ndarray:
        """Noise levels at the start of each step plus the final level (n_steps + 1)."""
        return np.geomspace(self.sigma_max, self.sigma_min, self.n_steps + 1)

    def times(self) -> np.ndarray:
        """Diffusion time per step, 1 at the first step and 0 at the last."""
        return 1.0 - np.arange(self.n_steps) / (self.n_steps - 1)


class Denoiser(Protocol):
    def predict_x0(self, x: np.ndarray, sigma: float) -> np.ndarray: ...


class MixtureDenoiser:
    """Exact posterior mean under an isotropic Gaussian-mixture prior.

    The prior is ``sum_k w_k N(mu_k, tau^2 I)``; at noise level ``sigma`` the
    posterior mean is a responsibility-weighted average of the references,
    shrunk towards ``x`` by ``tau^2 / (sigma^2 + tau^2)``.
    """

    def __init__(self, references, component_weights=None, tau_sq: float = 0.01):
        refs = np.asarray(references, dtype=np.float64)
        if refs.ndim == 2:
            refs = refs[None]
        if refs.ndim != 3 or refs.shape[2] != 3:
            raise ValueError(f"references must be (K, N, 3), got {refs.shape}")
        K = refs.shape[0]
        w = np.full(K, 1.0 / K) if component_weights is None else np.asarray(component_weights, dtype=np.float64)
        if w.shape != (K,) or np.any(w < 0) or not math.isclose(w.sum(), 1.0, rel_tol=1e-9):
            raise ValueError("component weights must be K non-negative numbers summing to 1")
        if tau_sq <= 0:
            raise ValueError("tau_sq must be positive")
        self.references = refs
        self.component_weights = w
        self.tau_sq = float(tau_sq)
        self._logw = np.log(np.where(w > 0, w, 1e-300))

    def responsibilities(self, x: np.ndarray, sigma: float) -> np.ndarray:
        var = sigma * sigma + self.tau_sq
        d2 = ((x[None] - self.references) ** 2).sum(axis=(1, 2))
        logr = self._logw - d2 / (2.0 * var)
        return np.exp(logr - logsumexp(logr))

    def predict_x0(self, x: np.ndarray, sigma: float) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.references.shape[1:]:
            raise ValueError(f"expected {self.references.shape[1:]}, got {x.shape}")
        r = self.responsibilities(x, sigma)
        mean = np.tensordot(r, self.references, axes=1)
        s2 = sigma * sigma
        return (s2 * mean + self.tau_sq * x) / (s2 + self.tau_sq)

    def score(self, x: np.ndarray, sigma: float) -> np.ndarray:
        """Analytic grad log p_sigma(x) of the noised mixture."""
        r = self.responsibilities(x, sigma)
        mean = np.tensordot(r, self.references, axes=1)
        return (mean - x) / (sigma * sigma + self.tau_sq)

    def nearest(self, x: np.ndarray) -> tuple[int, np.ndarray]:
        """Index of, and RMSD to, each reference (no superposition)."""
        d = np.sqrt(((x[None] - self.references) ** 2).sum(axis=2).mean(axis=1))
        return int(np.argmin(d)), d


def mixture_predict_x0(x, sigma, denoiser: MixtureDenoiser):
    return denoiser.predict_x0(x, sigma)


def score_from_x0(x, x0_hat, sigma):
    x = np.asarray(x, dtype=np.float64)
    x0_hat = np.asarray(x0_hat, dtype=np.float64)
    if x.shape != x0_hat.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {x0_hat.shape}")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return (x0_hat - x) / (sigma * sigma)


def guided_score(base_score, potential_gradient, lambda_t):
    base_score = np.asarray(base_score, dtype=np.float64)
    potential_gradient = np.asarray(potential_gradient, dtype=np.float64)
    if base_score.shape != potential_gradient.shape:
        raise ValueError(f"shape mismatch {base_score.shape} vs {potential_gradient.shape}")
    if lambda_t < 0:
        raise ValueError("lambda_t must be >= 0")
    return base_score - lambda_t * potential_gradient


@dataclass
class SamplerConfig:
    seed: int = 0
    n_steps: int = 200
    sigma_max: float = 160.0
    sigma_min: float = 0.05
    # 0: probability-flow ODE (deterministic given x_T); 1: full reverse SDE
    churn: float = 1.0
    family_weights: dict = field(default_factory=lambda: dict.fromkeys(FAMILIES, 1.0))
    record_trajectory: bool = False

    def __post_init__(self):
        check_weights(self.family_weights)
        if not 0.0 <= self.churn <= 1.0:
            raise ValueError("churn must lie in [0, 1]")

    def noise_schedule(self) -> NoiseSchedule:
        return NoiseSchedule(self.sigma_max, self.sigma_min, self.n_steps)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("record_trajectory")
        return d


@dataclass
class StepLog:
    step: int
    t: float
    sigma: float
    energies: dict
    weights: dict
    applied: dict


@dataclass
class SampleResult:
    coords: np.ndarray
    log: list
    final_energies: dict
    trajectory: np.ndarray | None = None

    def structure(self, template: Structure) -> Structure:
        return template.with_coords(self.coords)

    def log_dicts(self) -> list[dict]:
        return [asdict(s) for s in self.log]


def family_weights_at(step: int, t: float, schedules: sched.GuidanceSchedules,
                      config_weights: dict, sizes: dict) -> tuple[dict, dict]:
    """Effective per-family weight and whether the family is evaluated at ``step``."""
    # the exponential ramp scales cross-link guidance whenever several links act jointly
    n_xl = sum(sizes[f] for f in XL_FAMILIES)
    union = sched.union_lambda(1.0 - t, schedules.union) if n_xl > 1 else 1.0
    weights, applied = {}, {}
    for fam in FAMILIES:
        if fam in XL_FAMILIES:
            w = schedules.xl_base_weight * schedules.xl.weight(t) * union
            due = sched.should_apply(step, schedules.xl.eval_interval)
        else:
            w = schedules.hdx.weight(t)
            due = sched.should_apply(step, schedules.hdx.eval_interval)
        w *= config_weights.get(fam, 0.0)
        weights[fam] = float(w)
        applied[fam] = bool(due and w > 0 and sizes[fam] > 0)
    return weights, applied


def reverse_sample(denoiser: Denoiser, template: Structure, constraints: ConstraintSet | None = None,
                   params: PotentialParams = PotentialParams(),
                   schedules: sched.GuidanceSchedules = sched.GuidanceSchedules(),
                   config: SamplerConfig | None = None,
                   compiled: CompiledConstraints | None = None) -> SampleResult:
    """Sample one structure, steering ``x0_hat`` with restraint gradients.

    Constraint references are resolved against ``template`` before the first
    step so resolution failures surface early.
    """
    config = config or SamplerConfig()
    if compiled is None:
        compiled = CompiledConstraints(template, constraints or ConstraintSet(), params)
    sizes = compiled.sizes()
    n_atoms = template.n_atoms
    ns = config.noise_schedule()
    sigmas = ns.sigmas()
    times = ns.times()
    eta = config.churn
    rng = np.random.default_rng(config.seed)

    x = sigmas[0] * rng.standard_normal((n_atoms, 3))
    log = []
    traj = np.empty((ns.n_steps + 1, n_atoms, 3)) if config.record_trajectory else None
    if traj is not None:
        traj[0] = x
    for i in range(ns.n_steps):
        sigma, sigma_next, t = float(sigmas[i]), float(sigmas[i + 1]), float(times[i])
        x0 = denoiser.predict_x0(x, sigma)
        weights, applied = family_weights_at(i, t, schedules, config.family_weights, sizes)
        energies = {}
        grad = np.zeros((n_atoms, 3))
        for fam in FAMILIES:
            if sizes[fam] == 0:
                continue
            rep = compiled.family(fam, x0)
            energies[fam] = rep.total_energy
            if applied[fam]:
                grad += weights[fam] * rep.gradient
        score = guided_score(score_from_x0(x, x0, sigma), grad, 1.0 / (sigma * sigma))
        delta = sigma * sigma - sigma_next * sigma_next
        x = x + 0.5 * (1.0 + eta * eta) * delta * score
        if eta > 0:
            x = x + eta * math.sqrt(delta) * rng.standard_normal((n_atoms, 3))
        if not np.all(np.isfinite(x)):
            raise DivergenceError(i)
        log.append(StepLog(i, t, sigma, energies, weights, applied))
        if traj is not None:
            traj[i + 1] = x
    final = {fam: compiled.family(fam, x).total_energy for fam in FAMILIES if sizes[fam]}
    return SampleResult(x, log, final, traj)
