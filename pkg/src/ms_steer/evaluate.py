"""Constraint satisfaction, reference-based accuracy and model ranking."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .constraints import ConstraintSet, HdxBurial, HdxProxy, XlNegative, XlPositive, constraint_to_json
from .structure import ResidueRef, ResolutionError, Structure

DEFAULT_INTERFACE_CUTOFF = 10.0
HDX_SATISFIED_DRSA = 0.05


class NoInterfaceError(ValueError):
    pass


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class ConstraintCheck:
    constraint: object
    value: float
    passed: bool


@dataclass
class SatisfactionReport:
    """Per-constraint checks plus family percentages (``None`` when a family is absent)."""

    xl: list = field(default_factory=list)
    hdx: list = field(default_factory=list)

    @staticmethod
    def _pct(checks) -> float | None:
        if not checks:
            return None
        return 100.0 * sum(c.passed for c in checks) / len(checks)

    @property
    def xl_pct(self) -> float | None:
        return self._pct(self.xl)

    @property
    def hdx_pct(self) -> float | None:
        return self._pct(self.hdx)

    @property
    def overall(self) -> float | None:
        vals = [v for v in (self.xl_pct, self.hdx_pct) if v is not None]
        return sum(vals) / len(vals) if vals else None

    def merged(self, other: "SatisfactionReport") -> "SatisfactionReport":
        return SatisfactionReport(self.xl + other.xl, self.hdx + other.hdx)

    def to_dict(self) -> dict:
        def rows(checks):
            out = []
            for c in checks:
                con = c.constraint
                out.append({"constraint": con if isinstance(con, str) else constraint_to_json(con),
                            "value": c.value, "passed": c.passed})
            return out
        return {"xl_pct": self.xl_pct, "hdx_pct": self.hdx_pct, "overall": self.overall,
                "xl": rows(self.xl), "hdx": rows(self.hdx)}


def _unresolved(model: Structure, refs) -> list[str]:
    bad = []
    for r in refs:
        try:
            model.atom_index(r, "CA")
        except ResolutionError as e:
            bad.append(str(e))
    return bad


def xl_satisfaction(model: Structure, constraints) -> SatisfactionReport:
    """Positive links pass at CA distance <= d_max, negative links above d_min."""
    xls = [c for c in constraints if isinstance(c, (XlPositive, XlNegative))]
    bad = []
    for c in xls:
        if _unresolved(model, (c.i, c.j)):
            bad.append(f"{type(c).__name__}({c.i}, {c.j})")
    if bad:
        raise ResolutionError(f"unresolvable cross-links: {', '.join(bad)}")
    xyz = model.coords()
    checks = []
    for c in xls:
        d = float(np.linalg.norm(xyz[model.atom_index(c.i)] - xyz[model.atom_index(c.j)]))
        ok = d <= c.d_max if isinstance(c, XlPositive) else d > c.d_min
        checks.append(ConstraintCheck(c, d, bool(ok)))
    return SatisfactionReport(xl=checks)


def hdx_satisfaction(model_complex: Structure, constraints, **sasa_kw) -> SatisfactionReport:
    """Each protected residue passes when the model buries it by at least 0.05 RSA.

    Monomer states come from splitting the model into isolated chains.  A
    residue named by several HDX restraints counts once.
    """
    refs = sorted({c.residue for c in constraints if isinstance(c, (HdxProxy, HdxBurial))})
    if not refs:
        return SatisfactionReport()
    bad = _unresolved(model_complex, refs)
    if bad:
        raise ResolutionError(f"unresolvable HDX residues: {', '.join(bad)}")
    drsa = geometry.delta_rsa(model_complex, model_complex, **sasa_kw).values
    checks = [ConstraintCheck(str(r), float(drsa[r]), bool(drsa[r] >= HDX_SATISFIED_DRSA)) for r in refs]
    return SatisfactionReport(hdx=checks)


def satisfaction(model: Structure, constraints, **sasa_kw) -> SatisfactionReport:
    return xl_satisfaction(model, constraints).merged(hdx_satisfaction(model, constraints, **sasa_kw))


# ---------------------------------------------------------------------------
# accuracy against a reference
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AccuracyReport:
    lrmsd: float
    irmsd: float
    external_dockq: float | None = None

    def to_dict(self) -> dict:
        return {"lrmsd": self.lrmsd, "irmsd": self.irmsd, "external_dockq": self.external_dockq}


def interface_residues(reference: Structure, cutoff: float = DEFAULT_INTERFACE_CUTOFF) -> list[ResidueRef]:
    """Residues with a CA within ``cutoff`` of any CA on another chain."""
    xyz = reference.coords()
    refs = reference.ca_refs()
    idx = np.array([reference.atom_index(r) for r in refs])
    chains = np.array([r.chain_id for r in refs])
    p = xyz[idx]
    d = np.linalg.norm(p[:, None] - p[None], axis=-1)
    near = (d <= cutoff) & (chains[:, None] != chains[None])
    return [r for r, hit in zip(refs, near.any(axis=1)) if hit]


def _ca(s: Structure, refs) -> np.ndarray:
    xyz = s.coords()
    return xyz[[s.atom_index(r) for r in refs]]


def interface_rmsd(model: Structure, reference: Structure,
                   interface_cutoff: float = DEFAULT_INTERFACE_CUTOFF) -> float:
    """RMSD over reference-interface CAs after superposing on those same CAs."""
    refs = interface_residues(reference, interface_cutoff)
    if not refs:
        raise NoInterfaceError(f"no inter-chain CA pair within {interface_cutoff} A")
    if len(refs) < 3:
        raise NoInterfaceError(f"interface has only {len(refs)} residues; need 3 to superpose")
    _, _, r = geometry.kabsch_superpose(_ca(model, refs), _ca(reference, refs))
    return r


def ligand_rmsd(model: Structure, reference: Structure, receptor_chain: str, ligand_chain: str) -> float:
    """Ligand-chain CA RMSD after superposing the receptor chain only."""
    rec = reference.ca_refs(receptor_chain)
    lig = reference.ca_refs(ligand_chain)
    for s in (model, reference):
        s.chain(receptor_chain)
        s.chain(ligand_chain)
    R, t, _ = geometry.kabsch_superpose(_ca(model, rec), _ca(reference, rec))
    moved = _ca(model, lig) @ R.T + t
    return geometry.rmsd(moved, _ca(reference, lig))


def accuracy(model: Structure, reference: Structure, receptor_chain: str, ligand_chain: str,
             interface_cutoff: float = DEFAULT_INTERFACE_CUTOFF,
             external_dockq: float | None = None) -> AccuracyReport:
    return AccuracyReport(ligand_rmsd(model, reference, receptor_chain, ligand_chain),
                          interface_rmsd(model, reference, interface_cutoff), external_dockq)


# ---------------------------------------------------------------------------
# ranking
# ---------------------------------------------------------------------------

@dataclass
class Ranking:
    order: list  # model indices, best first
    reports: list  # SatisfactionReport per input model
    external_scores: list | None

    @property
    def best(self) -> int:
        return self.order[0]

    def summary(self) -> dict:
        """Best model's family percentages and mean / SD over all models."""
        out = {"best": self.best, "n_models": len(self.reports)}
        for key in ("xl_pct", "hdx_pct", "overall"):
            vals = [getattr(r, key) for r in self.reports]
            vals = [v for v in vals if v is not None]
            out[key] = {
                "best": getattr(self.reports[self.best], key),
                # population SD so a single model reports 0
                "mean": float(np.mean(vals)) if vals else None,
                "sd": float(np.std(vals)) if vals else None,
            }
        return out


def rank_models(models, constraints, external_scores=None, reports=None, **sasa_kw) -> Ranking:
    """Order by overall satisfaction; ties go to the higher external score,
    or to the earlier model when no scores are given.

    Precomputed ``reports`` skip the satisfaction calculation.
    """
    models = list(models)
    if not models:
        raise EvaluationError("need at least one model")
    if external_scores is not None:
        external_scores = [float(v) for v in external_scores]
        if len(external_scores) != len(models):
            raise EvaluationError(f"{len(external_scores)} external scores for {len(models)} models")
    if reports is None:
        reports = [satisfaction(m, constraints, **sasa_kw) for m in models]
    if any(r.overall is None for r in reports):
        raise EvaluationError("constraints contain no XL or HDX restraint to score")

    def key(k):
        tie = -external_scores[k] if external_scores is not None else 0.0
        return (-reports[k].overall, tie, k)

    return Ranking(sorted(range(len(models)), key=key), list(reports), external_scores)


def posthoc_compare(guided_models, naive_models, constraints, **sasa_kw) -> list[dict]:
    """One merged table of guided and naive models, best average satisfaction first.

    Ties keep input order, alternating guided/naive at equal positions.
    """
    guided_models, naive_models = list(guided_models), list(naive_models)
    if not guided_models or not naive_models:
        raise EvaluationError("both model sets must be non-empty")
    if not isinstance(constraints, ConstraintSet):
        constraints = ConstraintSet(list(constraints))
    if len(constraints) == 0:
        raise EvaluationError("need at least one constraint family to compare")
    rows = []
    for label, order, models in (("guided", 0, guided_models), ("naive", 1, naive_models)):
        for k, m in enumerate(models):
            rep = satisfaction(m, constraints, **sasa_kw)
            rows.append({"source": label, "index": k, "xl_pct": rep.xl_pct, "hdx_pct": rep.hdx_pct,
                         "average": rep.overall, "_order": order})
    rows.sort(key=lambda r: (-r["average"], r["index"], r["_order"]))
    for rank, r in enumerate(rows, start=1):
        del r["_order"]
        r["rank"] = rank
    return rows


# ---------------------------------------------------------------------------
# serialisation
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.4f}" if math.isfinite(v) else str(v)
    return str(v)


def rows_to_csv(rows: list[dict], columns: list[str] | None = None) -> str:
    columns = columns or (list(rows[0]) if rows else [])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def ranking_rows(ranking: Ranking, names: list[str], accuracy_reports: list | None = None) -> list[dict]:
    rows = []
    for rank, k in enumerate(ranking.order, start=1):
        rep = ranking.reports[k]
        row = {"rank": rank, "model": names[k], "xl_pct": rep.xl_pct, "hdx_pct": rep.hdx_pct,
               "overall": rep.overall}
        if ranking.external_scores is not None:
            row["external_score"] = ranking.external_scores[k]
        if accuracy_reports is not None:
            row["lrmsd"] = accuracy_reports[k].lrmsd
            row["irmsd"] = accuracy_reports[k].irmsd
        rows.append(row)
    return rows


def to_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)
