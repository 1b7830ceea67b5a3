"""Differentiable restraint energies with analytic gradients.

Energies are evaluated on coordinate arrays laid out like
``Structure.coords()``.  :func:`compile_constraints` resolves residue
references once so the sampler can re-evaluate cheaply every step; the
``Structure``-level functions are thin wrappers around it.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .constraints import FAMILIES, ConstraintSet, HdxBurial, HdxProxy, XlNegative, XlPositive
from .structure import ResidueRef, ResolutionError, Structure

HDX_DMAX_FLOOR = 3.0


@dataclass(frozen=True)
class PotentialParams:
    k: float = 20.0
    sigma: float = 5.0
    burial_ref: float = 5.0
    tau: float = 0.0
    d_base: float = 8.0
    w_s: float = 0.5
    # soft-minimum sharpness for HDX contact restraints, 1/Angstrom
    beta: float = 2.0
    # "ca" or "heavy": which atoms count as neighbours in the burial sum
    burial_atoms: str = "ca"

    def __post_init__(self):
        if self.sigma <= 0 or self.burial_ref <= 0:
            raise ValueError("sigma and burial_ref must be positive")
        if self.k < 0:
            raise ValueError("k must be non-negative")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")
        if self.d_base < HDX_DMAX_FLOOR:
            raise ValueError(f"d_base must be >= {HDX_DMAX_FLOOR}")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.burial_atoms not in ("ca", "heavy"):
            raise ValueError("burial_atoms must be 'ca' or 'heavy'")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EnergyReport:
    total_energy: float
    gradient: np.ndarray
    per_constraint_energy: np.ndarray
    # upper bound on hard-min minus soft-min for the contact terms (ln n / beta)
    softmin_slack: float = 0.0
    extras: dict = field(default_factory=dict)

    @classmethod
    def zero(cls, n_atoms: int) -> "EnergyReport":
        return cls(0.0, np.zeros((n_atoms, 3)), np.zeros(0))


def hdx_dmax(delta: float, params: PotentialParams = PotentialParams()) -> float:
    """Contact bound tightened by protection magnitude, floored at 3 A."""
    return max(HDX_DMAX_FLOOR, params.d_base * (1.0 - abs(delta) * params.w_s))


def pseudo_sasa(burial_value, burial_ref: float = 5.0):
    return np.exp(-np.asarray(burial_value, dtype=np.float64) / burial_ref)


class CompiledConstraints:
    """Constraint set resolved to atom indices of a template structure."""

    def __init__(self, template: Structure, cs: ConstraintSet, params: PotentialParams = PotentialParams()):
        self.params = params
        self.n_atoms = template.n_atoms
        self.constraints = cs
        idx = lambda ref: template.atom_index(ref, "CA")  # noqa: E731

        pos = cs.of(XlPositive)
        self.pos_i = np.array([idx(c.i) for c in pos], dtype=np.int64)
        self.pos_j = np.array([idx(c.j) for c in pos], dtype=np.int64)
        self.pos_dmin = np.array([c.d_min for c in pos], dtype=np.float64)
        self.pos_dmax = np.array([c.d_max for c in pos], dtype=np.float64)

        neg = cs.of(XlNegative)
        self.neg_i = np.array([idx(c.i) for c in neg], dtype=np.int64)
        self.neg_j = np.array([idx(c.j) for c in neg], dtype=np.int64)
        self.neg_dmin = np.array([c.d_min for c in neg], dtype=np.float64)
        self.neg_dmax = np.full(len(neg), np.inf)

        prox = cs.of(HdxProxy)
        self.prox_i = np.array([idx(c.residue) for c in prox], dtype=np.int64)
        self.prox_dmax = np.array([hdx_dmax(c.delta, params) for c in prox], dtype=np.float64)
        ptr = [0]
        partners: list[int] = []
        self._slack = 0.0
        for c in prox:
            try:
                p = template.ca_indices(c.partner_chain)
                template.chain(c.partner_chain)
            except ResolutionError:
                raise ResolutionError(f"HDX proxy for {c.residue}: partner chain {c.partner_chain!r} not found") from None
            if len(p) == 0:
                raise ResolutionError(f"HDX proxy for {c.residue}: partner chain {c.partner_chain!r} has no CA atoms")
            partners.extend(p.tolist())
            ptr.append(len(partners))
            self._slack = max(self._slack, math.log(len(p)) / params.beta)
        self.prox_ptr = np.array(ptr, dtype=np.int64)
        self.prox_partners = np.array(partners, dtype=np.int64)

        bur = cs.of(HdxBurial)
        self.bur_i = np.array([idx(c.residue) for c in bur], dtype=np.int64)
        self.ca_all = template.ca_indices()
        self.bur_neigh = None
        if params.burial_atoms == "heavy" and len(bur):
            heavy = []
            owner = []
            for n, (c, r, a) in enumerate(template.atoms()):
                if a.element != "H":
                    heavy.append(n)
                    owner.append((c.chain_id, r.seq_number))
            heavy = np.array(heavy, dtype=np.int64)
            self.bur_neigh = [
                heavy[[o != (c.residue.chain_id, c.residue.seq_number) for o in owner]] for c in bur
            ]

    # -- per-family ------------------------------------------------------
    def xl_pos(self, x: np.ndarray) -> EnergyReport:
        if len(self.pos_i) == 0:
            return EnergyReport.zero(self.n_atoms)
        e, g = kernels.pair_flat_bottom(x, self.pos_i, self.pos_j, self.pos_dmin, self.pos_dmax)
        return EnergyReport(float(e.sum()), g, e)

    def xl_neg(self, x: np.ndarray) -> EnergyReport:
        if len(self.neg_i) == 0:
            return EnergyReport.zero(self.n_atoms)
        e, g = kernels.pair_flat_bottom(x, self.neg_i, self.neg_j, self.neg_dmin, self.neg_dmax)
        return EnergyReport(float(e.sum()), g, e)

    def hdx_proxy(self, x: np.ndarray) -> EnergyReport:
        if len(self.prox_i) == 0:
            return EnergyReport.zero(self.n_atoms)
        e, g, m = kernels.softmin_contact(
            x, self.prox_i, self.prox_ptr, self.prox_partners, self.prox_dmax, self.params.beta
        )
        return EnergyReport(float(e.sum()), g, e, softmin_slack=self._slack, extras={"softmin": m})

    def hdx_burial(self, x: np.ndarray) -> EnergyReport:
        if len(self.bur_i) == 0:
            return EnergyReport.zero(self.n_atoms)
        p = self.params
        if self.bur_neigh is None:
            e, g, b, s = kernels.burial_loss(x, self.bur_i, self.ca_all, p.sigma, p.burial_ref, p.tau, p.k)
        else:
            e = np.zeros(len(self.bur_i))
            b = np.zeros_like(e)
            s = np.zeros_like(e)
            g = np.zeros_like(x)
            for c, (i, neigh) in enumerate(zip(self.bur_i, self.bur_neigh)):
                ec, gc, bc, sc = kernels.burial_loss(
                    x, self.bur_i[c:c + 1], neigh, p.sigma, p.burial_ref, p.tau, p.k
                )
                e[c], b[c], s[c] = ec[0], bc[0], sc[0]
                g += gc
        return EnergyReport(float(e.sum()), g, e, extras={"burial": b, "pseudo_sasa": s})

    def family(self, name: str, x: np.ndarray) -> EnergyReport:
        return getattr(self, name)(x)

    def sizes(self) -> dict[str, int]:
        return {
            "xl_pos": len(self.pos_i),
            "xl_neg": len(self.neg_i),
            "hdx_proxy": len(self.prox_i),
            "hdx_burial": len(self.bur_i),
        }

    def total(self, x: np.ndarray, family_weights: dict[str, float]) -> tuple[EnergyReport, dict[str, EnergyReport]]:
        check_weights(family_weights)
        reports = {}
        energy = 0.0
        grad = np.zeros((self.n_atoms, 3))
        per = []
        for fam in FAMILIES:
            w = family_weights.get(fam, 0.0)
            rep = self.family(fam, x)
            reports[fam] = rep
            energy += w * rep.total_energy
            grad += w * rep.gradient
            per.append(w * rep.per_constraint_energy)
        slack = reports["hdx_proxy"].softmin_slack
        return EnergyReport(energy, grad, np.concatenate(per), softmin_slack=slack), reports


def check_weights(family_weights: dict[str, float]) -> None:
    unknown = set(family_weights) - set(FAMILIES)
    if unknown:
        raise ValueError(f"unknown constraint families: {sorted(unknown)}")
    for k, v in family_weights.items():
        if not (v >= 0 and math.isfinite(v)):
            raise ValueError(f"family weight {k} must be finite and >= 0, got {v}")


# -- Structure-level API ------------------------------------------------------

def _report(s: Structure, cs: ConstraintSet, family: str, params: PotentialParams) -> EnergyReport:
    return CompiledConstraints(s, cs, params).family(family, s.coords())


def u_dist(s: Structure, pairs: list[XlPositive]) -> EnergyReport:
    """Flat-bottom distance restraint over CA pairs."""
    return _report(s, ConstraintSet(list(pairs)), "xl_pos", PotentialParams())


def u_neg(s: Structure, pairs: list[XlNegative]) -> EnergyReport:
    """One-sided repulsive restraint pushing CA pairs beyond ``d_min``."""
    return _report(s, ConstraintSet(list(pairs)), "xl_neg", PotentialParams())


def hdx_proxy_potential(s: Structure, constraints: list[HdxProxy],
                        params: PotentialParams = PotentialParams()) -> EnergyReport:
    return _report(s, ConstraintSet(list(constraints)), "hdx_proxy", params)


def burial(s: Structure, i: ResidueRef, sigma: float = 5.0) -> float:
    """Gaussian-weighted count of other residues' CA atoms around residue ``i``."""
    xyz = s.coords()
    a = s.atom_index(i, "CA")
    others = s.ca_indices()
    others = others[others != a]
    d2 = ((xyz[others] - xyz[a]) ** 2).sum(axis=1)
    return float(np.exp(-d2 / (2.0 * sigma * sigma)).sum())


def burial_loss(s: Structure, constraints: list[HdxBurial],
                params: PotentialParams = PotentialParams()) -> EnergyReport:
    return _report(s, ConstraintSet(list(constraints)), "hdx_burial", params)


def total_potential(s: Structure, cs: ConstraintSet, params: PotentialParams = PotentialParams(),
                    family_weights: dict[str, float] | None = None) -> EnergyReport:
    weights = dict.fromkeys(FAMILIES, 1.0) if family_weights is None else family_weights
    rep, _ = CompiledConstraints(s, cs, params).total(s.coords(), weights)
    return rep
