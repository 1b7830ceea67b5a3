"""Protein structure containers and fixed-column PDB reading/writing."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator

import numpy as np


class StructureError(ValueError):
    """Base class for structure-related failures."""


class PDBParseError(StructureError):
    def __init__(self, lineno: int, line: str, reason: str):
        self.lineno = lineno
        self.line = line
        super().__init__(f"line {lineno}: {reason}: {line.rstrip()!r}")


class EmptyStructureError(StructureError):
    pass


class ResolutionError(StructureError, KeyError):
    """A residue, chain or atom reference could not be found."""

    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


class MissingAtomError(ResolutionError):
    pass


@dataclass(frozen=True, order=True)
class ResidueRef:
    chain_id: str
    seq_number: int

    def __str__(self) -> str:
        return f"{self.chain_id}:{self.seq_number}"

    @classmethod
    def parse(cls, text: str) -> "ResidueRef":
        chain, _, num = text.partition(":")
        return cls(chain, int(num))


@dataclass(frozen=True)
class Atom:
    name: str
    element: str
    position: tuple[float, float, float]


@dataclass(frozen=True)
class Residue:
    seq_number: int
    amino_acid: str
    atoms: tuple[Atom, ...]

    def atom(self, name: str) -> Atom | None:
        for a in self.atoms:
            if a.name == name:
                return a
        return None

    @property
    def incomplete(self) -> bool:
        return self.amino_acid != "UNK" and self.atom("CA") is None


@dataclass(frozen=True)
class Chain:
    chain_id: str
    residues: tuple[Residue, ...]

    def __post_init__(self):
        nums = [r.seq_number for r in self.residues]
        if any(b <= a for a, b in zip(nums, nums[1:])):
            raise StructureError(f"chain {self.chain_id}: residue numbers not strictly increasing")


@dataclass(frozen=True)
class Structure:
    """Chains -> residues -> atoms.  Immutable; coordinates in Angstrom.

    Atoms are addressed in flat order (chain, residue, atom) by :meth:`coords`
    and :meth:`with_coords`, which is the layout the sampler works on.
    """

    chains: tuple[Chain, ...]
    _index: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        ids = [c.chain_id for c in self.chains]
        if len(set(ids)) != len(ids):
            raise StructureError(f"duplicate chain ids: {ids}")
        index: dict[tuple[str, int], tuple[int, Residue]] = {}
        n = 0
        for c in self.chains:
            for r in c.residues:
                index[(c.chain_id, r.seq_number)] = (n, r)
                for a in r.atoms:
                    if not all(math.isfinite(v) for v in a.position):
                        raise StructureError(f"non-finite coordinate in {c.chain_id}:{r.seq_number} {a.name}")
                n += len(r.atoms)
        object.__setattr__(self, "_index", index)

    # -- navigation -------------------------------------------------------
    @property
    def n_atoms(self) -> int:
        return sum(len(r.atoms) for c in self.chains for r in c.residues)

    @property
    def n_residues(self) -> int:
        return sum(len(c.residues) for c in self.chains)

    @property
    def chain_ids(self) -> list[str]:
        return [c.chain_id for c in self.chains]

    def chain(self, chain_id: str) -> Chain:
        for c in self.chains:
            if c.chain_id == chain_id:
                return c
        raise ResolutionError(f"chain {chain_id!r} not found")

    def residue(self, ref: ResidueRef) -> Residue:
        try:
            return self._index[(ref.chain_id, ref.seq_number)][1]
        except KeyError:
            raise ResolutionError(f"residue {ref} not found") from None

    def residue_refs(self) -> Iterator[ResidueRef]:
        for c in self.chains:
            for r in c.residues:
                yield ResidueRef(c.chain_id, r.seq_number)

    def atom_index(self, ref: ResidueRef, name: str = "CA") -> int:
        """Flat index of atom ``name`` of residue ``ref``."""
        try:
            start, res = self._index[(ref.chain_id, ref.seq_number)]
        except KeyError:
            raise ResolutionError(f"residue {ref} not found") from None
        for k, a in enumerate(res.atoms):
            if a.name == name:
                return start + k
        raise MissingAtomError(f"residue {ref} has no {name} atom")

    def ca_indices(self, chain_id: str | None = None) -> np.ndarray:
        out = []
        for c in self.chains:
            if chain_id is not None and c.chain_id != chain_id:
                continue
            for r in c.residues:
                if r.atom("CA") is not None:
                    out.append(self.atom_index(ResidueRef(c.chain_id, r.seq_number)))
        return np.asarray(out, dtype=np.int64)

    def ca_refs(self, chain_id: str | None = None) -> list[ResidueRef]:
        return [
            ResidueRef(c.chain_id, r.seq_number)
            for c in self.chains
            if chain_id is None or c.chain_id == chain_id
            for r in c.residues
            if r.atom("CA") is not None
        ]

    def atoms(self) -> Iterator[tuple[Chain, Residue, Atom]]:
        for c in self.chains:
            for r in c.residues:
                for a in r.atoms:
                    yield c, r, a

    def elements(self) -> list[str]:
        return [a.element for _, _, a in self.atoms()]

    # -- coordinates ------------------------------------------------------
    def coords(self) -> np.ndarray:
        return np.array([a.position for _, _, a in self.atoms()], dtype=np.float64).reshape(-1, 3)

    def with_coords(self, xyz: np.ndarray) -> "Structure":
        xyz = np.asarray(xyz, dtype=np.float64)
        if xyz.shape != (self.n_atoms, 3):
            raise ValueError(f"expected ({self.n_atoms}, 3) coordinates, got {xyz.shape}")
        it = iter(xyz.tolist())
        chains = tuple(
            replace(c, residues=tuple(
                replace(r, atoms=tuple(replace(a, position=tuple(next(it))) for a in r.atoms))
                for r in c.residues
            ))
            for c in self.chains
        )
        return Structure(chains)

    def select_chains(self, chain_ids: Iterable[str]) -> "Structure":
        keep = set(chain_ids)
        return Structure(tuple(c for c in self.chains if c.chain_id in keep))


def build_ca_structure(chains: dict[str, tuple[list[str], np.ndarray]], start: int = 1) -> Structure:
    """Make a CA-only structure from ``{chain_id: (residue_names, xyz)}``."""
    out = []
    for cid, (names, xyz) in chains.items():
        xyz = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
        if len(names) != len(xyz):
            raise ValueError(f"chain {cid}: {len(names)} names for {len(xyz)} positions")
        residues = tuple(
            Residue(start + k, aa, (Atom("CA", "C", tuple(float(v) for v in p)),))
            for k, (aa, p) in enumerate(zip(names, xyz))
        )
        out.append(Chain(cid, residues))
    return Structure(tuple(out))


# -- PDB ------------------------------------------------------------------

def _infer_element(atom_name: str) -> str:
    for ch in atom_name.strip():
        if ch.isalpha():
            return ch.upper()
    return ""


def parse_pdb(text: str) -> Structure:
    """Parse ATOM records of the first model of a PDB document.

    HETATM records, alternate locations other than blank/'A', and every model
    after the first ENDMDL are skipped.
    """
    chains: dict[str, dict[int, tuple[str, list[Atom]]]] = {}
    order: list[str] = []
    n_atoms = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        rec = line[:6]
        if rec.startswith("ENDMDL"):
            break
        if not rec.startswith("ATOM"):
            continue
        if len(line) < 54:
            raise PDBParseError(lineno, line, "ATOM record shorter than 54 columns")
        altloc = line[16]
        if altloc not in (" ", "A"):
            continue
        name = line[12:16].strip()
        resname = line[17:20].strip() or "UNK"
        chain_id = line[21].strip() or "A"
        try:
            seq = int(line[22:26])
        except ValueError:
            raise PDBParseError(lineno, line, "bad residue number") from None
        try:
            pos = (float(line[30:38]), float(line[38:46]), float(line[46:54]))
        except ValueError:
            raise PDBParseError(lineno, line, "bad coordinate field") from None
        if not all(math.isfinite(v) for v in pos):
            raise PDBParseError(lineno, line, "non-finite coordinate")
        element = line[76:78].strip() if len(line) >= 78 else ""
        element = element.upper() or _infer_element(name)
        if chain_id not in chains:
            chains[chain_id] = {}
            order.append(chain_id)
        residues = chains[chain_id]
        if seq not in residues:
            residues[seq] = (resname, [])
        residues[seq][1].append(Atom(name, element, pos))
        n_atoms += 1
    if n_atoms == 0:
        raise EmptyStructureError("no ATOM records parsed")
    return Structure(tuple(
        Chain(cid, tuple(Residue(seq, rn, tuple(atoms)) for seq, (rn, atoms) in sorted(chains[cid].items())))
        for cid in order
    ))


def read_pdb(path) -> Structure:
    with open(path) as fh:
        return parse_pdb(fh.read())


def format_pdb(s: Structure) -> str:
    lines = []
    serial = 1
    for c in s.chains:
        for r in c.residues:
            for a in r.atoms:
                # 4-char names start in column 13, shorter ones in column 14
                name = a.name if len(a.name) == 4 else f" {a.name:<3}"
                x, y, z = a.position
                lines.append(
                    f"ATOM  {serial % 100000:5d} {name:4s} {r.amino_acid:>3s} {c.chain_id:1s}"
                    f"{r.seq_number:4d}    {x:8.3f}{y:8.3f}{z:8.3f}{1.0:6.2f}{0.0:6.2f}"
                    f"          {a.element:>2s}"
                )
                serial += 1
        lines.append("TER")
    lines.append("END")
    return "\n".join(lines) + "\n"


def write_pdb(s: Structure, path) -> None:
    with open(path, "w") as fh:
        fh.write(format_pdb(s))
