"""Deterministic toy complexes for tests, benchmarks and the demo CLI path."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import MixtureDenoiser
from .structure import Structure, build_ca_structure

# residues carrying the cross-linkable side chain, per 20-residue chain
LYSINE_POSITIONS = (0, 1, 2, 3, 16, 17, 18, 19)
FIXTURE_XL_THRESHOLD = 15.0


def helix_ca(n: int) -> np.ndarray:
    """CA trace of an ideal alpha helix along +x, centred at the origin."""
    k = np.arange(n)
    ang = np.deg2rad(100.0) * k
    xyz = np.stack([1.5 * k, 2.3 * np.cos(ang), 2.3 * np.sin(ang)], axis=1)
    return xyz - xyz.mean(axis=0)


def rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def residue_names(n: int) -> list[str]:
    return ["LYS" if k in LYSINE_POSITIONS else "ALA" for k in range(n)]


@dataclass
class TwoBasin:
    basin_a: Structure
    basin_b: Structure
    denoiser: MixtureDenoiser

    @property
    def template(self) -> Structure:
        return self.basin_a


def two_basin(n_per_chain: int = 20, tau_sq: float = 0.01, weights=(0.5, 0.5)) -> TwoBasin:
    """Two helices whose second chain sits in one of two rigid arrangements.

    Basin B is basin A with chain B rotated 90 degrees about z (around its own
    centroid) and shifted 20 A along x.
    """
    a = helix_ca(n_per_chain)
    b_a = helix_ca(n_per_chain) + np.array([0.0, 12.0, 0.0])
    cen = b_a.mean(axis=0)
    b_b = (b_a - cen) @ rot_z(np.pi / 2).T + cen + np.array([20.0, 0.0, 0.0])
    names = residue_names(n_per_chain)
    sa = build_ca_structure({"A": (names, a), "B": (names, b_a)})
    sb = build_ca_structure({"A": (names, a), "B": (names, b_b)})
    den = MixtureDenoiser(np.stack([sa.coords(), sb.coords()]), list(weights), tau_sq)
    return TwoBasin(sa, sb, den)


def single_basin(n_per_chain: int = 20, tau_sq: float = 0.01) -> TwoBasin:
    """Basin-A reference only (K = 1)."""
    fx = two_basin(n_per_chain, tau_sq)
    fx.denoiser = MixtureDenoiser(fx.basin_a.coords()[None], [1.0], tau_sq)
    return fx


def basin_of(fx: TwoBasin, coords: np.ndarray, tol: float = 2.0) -> str | None:
    """'A' or 'B' when the coordinates lie within ``tol`` A RMSD of that reference."""
    k, d = fx.denoiser.nearest(coords)
    if d[k] > tol:
        return None
    return "AB"[k] if len(d) == 2 else "A"
