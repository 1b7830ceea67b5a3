"""Synthetic XL-MS / HDX-MS restraints from known structures."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from itertools import combinations

import numpy as np

from . import geometry
from .constraints import ConstraintSet, HdxBurial, HdxProxy, XlNegative, XlPositive
from .structure import ResidueRef, Structure, StructureError


class CorrespondenceError(StructureError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    xl_residue_types: tuple[str, ...] = ("LYS",)
    xl_threshold: float = 30.0
    hdx_protection_floor: float = 0.05
    inter_chain_only: bool = True
    n_false_constraints: int = 0
    # minimum amount by which the truth must violate an injected link
    false_violation: float = 10.0

    def __post_init__(self):
        if self.xl_threshold <= 0 or self.hdx_protection_floor <= 0 or self.false_violation <= 0:
            raise ValueError("thresholds must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["xl_residue_types"] = list(self.xl_residue_types)
        return d


def _candidates(s: Structure, cfg: SynthConfig) -> list[tuple[ResidueRef, np.ndarray]]:
    xyz = s.coords()
    types = {t.upper() for t in cfg.xl_residue_types}
    out = []
    for c in s.chains:
        for r in c.residues:
            if r.amino_acid.upper() in types and r.atom("CA") is not None:
                ref = ResidueRef(c.chain_id, r.seq_number)
                out.append((ref, xyz[s.atom_index(ref)]))
    return out


def _pairs(s: Structure, cfg: SynthConfig):
    for (a, pa), (b, pb) in combinations(_candidates(s, cfg), 2):
        if cfg.inter_chain_only and a.chain_id == b.chain_id:
            continue
        yield a, b, float(np.linalg.norm(pa - pb))


def simulate_crosslinks(truth: Structure, cfg: SynthConfig = SynthConfig()) -> list[XlPositive]:
    """Every eligible residue pair within the linker reach becomes a positive link."""
    return [XlPositive(a, b, 0.0, cfg.xl_threshold) for a, b, d in _pairs(truth, cfg) if d <= cfg.xl_threshold]


def simulate_negative_links(truth_a: Structure, truth_b: Structure,
                            cfg: SynthConfig = SynthConfig()) -> list[XlNegative]:
    """Links seen in state b but out of reach in state a, as negatives for a."""
    refs_a = {ref: truth_a.residue(ref).amino_acid for ref in truth_a.residue_refs()}
    refs_b = {ref: truth_b.residue(ref).amino_acid for ref in truth_b.residue_refs()}
    if refs_a != refs_b:
        diff = sorted(set(refs_a.items()).symmetric_difference(refs_b.items()))[:5]
        raise CorrespondenceError(f"residue numbering differs between states, e.g. {diff}")
    out = []
    for a, b, d_b in _pairs(truth_b, cfg):
        if d_b <= cfg.xl_threshold and geometry.ca_distance(truth_a, a, b) > cfg.xl_threshold:
            out.append(XlNegative(a, b, cfg.xl_threshold))
    return out


def simulate_hdx(mono: Structure | list[Structure], complex_: Structure,
                 cfg: SynthConfig = SynthConfig(), **sasa_kw) -> list:
    """Residues buried by complex formation become burial + contact restraints."""
    drsa = geometry.delta_rsa(mono, complex_, **sasa_kw).values
    out = []
    for ref in sorted(drsa):
        v = drsa[ref]
        if v >= cfg.hdx_protection_floor:
            delta = min(1.0, v)
            partners = [c for c in complex_.chain_ids if c != ref.chain_id]
            out.append(HdxBurial(ref, delta))
            for p in partners:
                out.append(HdxProxy(ref, p, delta))
    return out


@dataclass
class NoiseReport:
    constraints: ConstraintSet
    n_requested: int
    n_added: int


def inject_noise(constraints, truth: Structure, cfg: SynthConfig, seed: int) -> NoiseReport:
    """Append ``cfg.n_false_constraints`` positive links the truth violates.

    A false link joins two CA-bearing residues (on different chains when
    ``inter_chain_only``) whose truth distance exceeds ``xl_threshold +
    false_violation``.  Provenance labels mark each entry as "planted" or
    "false".
    """
    base = constraints if isinstance(constraints, ConstraintSet) else ConstraintSet(list(constraints))
    prov = list(base.provenance) if base.provenance is not None else ["planted"] * len(base)
    if cfg.n_false_constraints == 0:
        return NoiseReport(ConstraintSet(list(base.constraints), prov), 0, 0)
    xyz = truth.coords()
    refs = truth.ca_refs()
    existing = {c.pair for c in base if isinstance(c, (XlPositive, XlNegative))}
    pool = []
    for a, b in combinations(refs, 2):
        if cfg.inter_chain_only and a.chain_id == b.chain_id:
            continue
        if tuple(sorted((a, b))) in existing:
            continue
        d = np.linalg.norm(xyz[truth.atom_index(a)] - xyz[truth.atom_index(b)])
        if d >= cfg.xl_threshold + cfg.false_violation:
            pool.append((a, b))
    rng = np.random.default_rng(seed)
    n = min(cfg.n_false_constraints, len(pool))
    picks = rng.choice(len(pool), size=n, replace=False) if n else []
    added = [XlPositive(pool[k][0], pool[k][1], 0.0, cfg.xl_threshold) for k in sorted(picks)]
    return NoiseReport(ConstraintSet(list(base.constraints) + added, prov + ["false"] * n),
                       cfg.n_false_constraints, n)
