"""Distances, solvent accessibility and rigid superposition."""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .structure import ResidueRef, Structure, StructureError

# van der Waals radii, Angstrom
VDW_RADII = {"C": 1.70, "N": 1.55, "O": 1.52, "S": 1.80, "H": 1.20, "P": 1.80}

# Theoretical maximum residue ASA (Tien et al. 2013), Angstrom^2
MAX_ASA = {
    "ALA": 129.0, "ARG": 274.0, "ASN": 195.0, "ASP": 193.0, "CYS": 167.0,
    "GLN": 225.0, "GLU": 223.0, "GLY": 104.0, "HIS": 224.0, "ILE": 197.0,
    "LEU": 201.0, "LYS": 236.0, "MET": 224.0, "PHE": 240.0, "PRO": 159.0,
    "SER": 155.0, "THR": 172.0, "TRP": 285.0, "TYR": 263.0, "VAL": 174.0,
}
MEAN_MAX_ASA = sum(MAX_ASA.values()) / len(MAX_ASA)

DEFAULT_PROBE = 1.4
DEFAULT_SPHERE_POINTS = 960


class UnknownElementError(StructureError):
    pass


class DegenerateSuperpositionError(ValueError):
    pass


def ca_distance(s: Structure, a: ResidueRef, b: ResidueRef) -> float:
    xyz = s.coords()
    return float(np.linalg.norm(xyz[s.atom_index(a)] - xyz[s.atom_index(b)]))


# ---------------------------------------------------------------------------
# SASA
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SasaProfile:
    residues: tuple[ResidueRef, ...]
    amino_acids: tuple[str, ...]
    sasa: np.ndarray
    probe_radius: float
    n_sphere_points: int

    def __len__(self) -> int:
        return len(self.residues)

    def as_dict(self) -> dict[ResidueRef, float]:
        return dict(zip(self.residues, self.sasa.tolist()))

    def rsa(self) -> np.ndarray:
        return np.array([relative_sasa(v, aa) for v, aa in zip(self.sasa, self.amino_acids)])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["chain", "seq", "aa", "sasa", "rsa"])
        for ref, aa, v, r in zip(self.residues, self.amino_acids, self.sasa, self.rsa()):
            w.writerow([ref.chain_id, ref.seq_number, aa, f"{v:.4f}", f"{r:.4f}"])
        return buf.getvalue()


def atom_radii(s: Structure) -> np.ndarray:
    radii = []
    for c, r, a in s.atoms():
        try:
            radii.append(VDW_RADII[a.element])
        except KeyError:
            raise UnknownElementError(
                f"no van der Waals radius for element {a.element!r} "
                f"(atom {a.name} of {c.chain_id}:{r.seq_number})"
            ) from None
    return np.asarray(radii, dtype=np.float64)


def atom_sasa(s: Structure, probe_radius: float = DEFAULT_PROBE,
              n_points: int = DEFAULT_SPHERE_POINTS) -> np.ndarray:
    if n_points < 92:
        raise ValueError("n_points must be >= 92")
    radii = atom_radii(s) + probe_radius
    return kernels.sasa(s.coords(), radii, kernels.fibonacci_sphere(n_points))


def shrake_rupley_sasa(s: Structure, probe_radius: float = DEFAULT_PROBE,
                       n_points: int = DEFAULT_SPHERE_POINTS) -> SasaProfile:
    """Per-residue accessible surface area by sphere-point quadrature."""
    per_atom = atom_sasa(s, probe_radius, n_points)
    refs, aas, vals = [], [], []
    k = 0
    for c in s.chains:
        for r in c.residues:
            n = len(r.atoms)
            refs.append(ResidueRef(c.chain_id, r.seq_number))
            aas.append(r.amino_acid)
            vals.append(per_atom[k:k + n].sum())
            k += n
    return SasaProfile(tuple(refs), tuple(aas), np.asarray(vals), probe_radius, n_points)


def relative_sasa(sasa: float, amino_acid: str) -> float:
    """SASA / theoretical maximum.  Not clamped; unknown residues use the table mean."""
    try:
        ref = MAX_ASA[amino_acid.upper()]
    except KeyError:
        warnings.warn(f"no max-ASA entry for {amino_acid!r}; using table mean", stacklevel=2)
        ref = MEAN_MAX_ASA
    return sasa / ref


@dataclass(frozen=True)
class DeltaRSA:
    values: dict[ResidueRef, float]
    skipped: tuple[ResidueRef, ...] = ()


def delta_rsa(mono: Structure | list[Structure], complex_: Structure,
              probe_radius: float = DEFAULT_PROBE,
              n_points: int = DEFAULT_SPHERE_POINTS) -> DeltaRSA:
    """RSA(monomer) - RSA(complex) per residue; positive means protected.

    ``mono`` is either one structure per isolated chain or a single structure
    whose chains are each computed in isolation.
    """
    mono_list = [mono] if isinstance(mono, Structure) else list(mono)
    mono_rsa: dict[ResidueRef, float] = {}
    for m in mono_list:
        for cid in m.chain_ids:
            prof = shrake_rupley_sasa(m.select_chains([cid]), probe_radius, n_points)
            mono_rsa.update(zip(prof.residues, prof.rsa().tolist()))
    prof = shrake_rupley_sasa(complex_, probe_radius, n_points)
    cplx_rsa = dict(zip(prof.residues, prof.rsa().tolist()))
    values = {ref: mono_rsa[ref] - cplx_rsa[ref] for ref in cplx_rsa if ref in mono_rsa}
    skipped = tuple(sorted(set(mono_rsa).symmetric_difference(cplx_rsa)))
    return DeltaRSA(values, skipped)


def split_chains(s: Structure) -> list[Structure]:
    return [s.select_chains([cid]) for cid in s.chain_ids]


# ---------------------------------------------------------------------------
# Kabsch
# ---------------------------------------------------------------------------

def kabsch_superpose(moving, target):
    """Least-squares rigid fit of ``moving`` onto ``target``.

    Returns ``(rotation, translation, rmsd)`` with
    ``moving @ rotation.T + translation`` the superposed coordinates.
    """
    P = np.asarray(moving, dtype=np.float64)
    Q = np.asarray(target, dtype=np.float64)
    if P.shape != Q.shape or P.ndim != 2 or P.shape[1] != 3:
        raise ValueError(f"coordinate sets must both be (n, 3), got {P.shape} and {Q.shape}")
    if len(P) < 3:
        raise DegenerateSuperpositionError("need at least 3 points")
    pc = P.mean(axis=0)
    qc = Q.mean(axis=0)
    P0 = P - pc
    Q0 = Q - qc
    scale = max(np.abs(P0).max(), np.abs(Q0).max(), 1.0)
    if np.linalg.matrix_rank(P0, tol=1e-9 * scale) < 2 or np.linalg.matrix_rank(Q0, tol=1e-9 * scale) < 2:
        raise DegenerateSuperpositionError("points are collinear or coincident")
    H = P0.T @ Q0
    U, _, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    D = np.diag([1.0, 1.0, d if d != 0 else 1.0])
    R = Vt.T @ D @ U.T
    t = qc - R @ pc
    fitted = P @ R.T + t
    rmsd = math.sqrt(float(((fitted - Q) ** 2).sum()) / len(P))
    return R, t, rmsd


def rmsd(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return math.sqrt(float(((a - b) ** 2).sum()) / len(a))
