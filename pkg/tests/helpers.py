"""Shared builders for the test suite."""

import numpy as np

from ms_steer.constraints import ConstraintSet, HdxBurial, HdxProxy, XlNegative, XlPositive
from ms_steer.structure import build_ca_structure


def random_complex(rng, n_a=15, n_b=15, spread=10.0):
    """Two-chain CA structure with random coordinates."""
    xyz = rng.normal(scale=spread, size=(n_a + n_b, 3))
    return build_ca_structure({
        "A": (["ALA"] * n_a, xyz[:n_a]),
        "B": (["LYS"] * n_b, xyz[n_a:]),
    })


def mixed_constraints(rng, s, n_each=4):
    refs_a = s.ca_refs("A")
    refs_b = s.ca_refs("B")
    pick = lambda refs: refs[int(rng.integers(len(refs)))]  # noqa: E731
    out = []
    for _ in range(n_each):
        out.append(XlPositive(pick(refs_a), pick(refs_b), float(rng.uniform(0, 4)), float(rng.uniform(6, 14))))
        out.append(XlNegative(pick(refs_a), pick(refs_b), float(rng.uniform(5, 25))))
        out.append(HdxProxy(pick(refs_a), "B", float(rng.uniform(0, 1))))
        out.append(HdxBurial(pick(refs_b), float(rng.uniform(0, 1))))
    return ConstraintSet(out)


def fd_gradient(f, x, h=1e-4):
    """Central finite-difference gradient of a scalar function of an (n, 3) array."""
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp = x.copy()
        xm = x.copy()
        xp[idx] += h
        xm[idx] -= h
        g[idx] = (f(xp) - f(xm)) / (2 * h)
    return g


def grad_rel_error(analytic, numeric, floor=1e-8):
    return float(np.linalg.norm(analytic - numeric) / max(np.linalg.norm(numeric), floor))


def backbone_helix(n, chain_id="A"):
    """Alpha-helical N, CA, C, O, CB trace with roughly ideal spacing (one chain, ALA)."""
    from ms_steer.structure import Atom, Chain, Residue, Structure

    # (radius, phase offset in degrees, rise offset) per atom around the helix axis
    layout = (("N", "N", 1.55, -28, -0.9), ("CA", "C", 2.3, 0, 0.0), ("C", "C", 1.6, 28, 0.9),
              ("O", "O", 1.9, 35, 2.1), ("CB", "C", 3.3, -10, -0.5))
    residues = []
    for k in range(n):
        atoms = []
        for name, el, r, phase, dz in layout:
            a = np.deg2rad(100.0 * k + phase)
            atoms.append(Atom(name, el, (r * np.cos(a), r * np.sin(a), 1.5 * k + dz)))
        residues.append(Residue(k + 1, "ALA", tuple(atoms)))
    return Structure((Chain(chain_id, tuple(residues)),))
