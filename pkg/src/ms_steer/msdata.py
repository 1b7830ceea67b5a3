"""Turning XL-MS intensities and HDX-MS peptide uptake into restraints,
plus the iterative constraint-subset search."""

from __future__ import annotations

import csv
import io
import logging
import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable

import numpy as np

from .constraints import ConstraintSet, HdxBurial, HdxProxy, XlNegative, XlPositive
from .structure import ResidueRef

log = logging.getLogger(__name__)

PEPTIDE_SD_FACTOR = 2.5
PROTECTION_THRESHOLD = 0.05


class MSDataError(ValueError):
    pass


class TableFormatError(MSDataError):
    def __init__(self, row: int, reason: str):
        self.row = row
        super().__init__(f"row {row}: {reason}")


# ---------------------------------------------------------------------------
# XL-MS
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class XlMeasurement:
    residue_i: ResidueRef
    residue_j: ResidueRef
    condition: str
    intensity: float
    linker_max: float

    def __post_init__(self):
        if not (self.intensity >= 0):
            raise MSDataError(f"negative intensity for {self.residue_i}-{self.residue_j}")

    @property
    def pair(self):
        return tuple(sorted((self.residue_i, self.residue_j)))


def derive_xl_constraints(measurements: Iterable[XlMeasurement], state_a: str, state_b: str,
                          enrich_ratio: float = 3.0, linker_max: float | None = None) -> ConstraintSet:
    """Positive links for pairs enriched in ``state_a``, negatives for pairs enriched in ``state_b``.

    Intensities of repeated measurements of one pair/condition are summed; a
    pair missing from a state counts as intensity 0 and a zero denominator
    makes the ratio infinite.  ``linker_max`` overrides the per-row value.
    """
    if enrich_ratio <= 1:
        raise MSDataError("enrich_ratio must be > 1")
    measurements = list(measurements)
    states = {m.condition for m in measurements}
    for s in (state_a, state_b):
        if s not in states:
            raise MSDataError(f"unknown state {s!r}; table has {sorted(states)}")
    inten: dict = defaultdict(lambda: defaultdict(float))
    reach: dict = {}
    order = []
    for m in measurements:
        if m.pair not in inten:
            order.append(m.pair)
        inten[m.pair][m.condition] += m.intensity
        reach[m.pair] = max(reach.get(m.pair, 0.0), m.linker_max)
    out = []
    for pair in order:
        a = inten[pair].get(state_a, 0.0)
        b = inten[pair].get(state_b, 0.0)
        if a == 0.0 and b == 0.0:
            continue
        lm = linker_max if linker_max is not None else reach[pair]
        r_ab = math.inf if b == 0.0 else a / b
        r_ba = math.inf if a == 0.0 else b / a
        if r_ab >= enrich_ratio:
            out.append(XlPositive(pair[0], pair[1], 0.0, lm))
        elif r_ba >= enrich_ratio:
            out.append(XlNegative(pair[0], pair[1], lm))
    return ConstraintSet(out)


def read_xl_csv(text: str) -> list[XlMeasurement]:
    """Rows ``chain_i,res_i,chain_j,res_j,condition,intensity,linker_max``."""
    cols = ["chain_i", "res_i", "chain_j", "res_j", "condition", "intensity", "linker_max"]
    out = []
    for n, row in _rows(text, cols):
        try:
            out.append(XlMeasurement(
                ResidueRef(row["chain_i"], int(row["res_i"])),
                ResidueRef(row["chain_j"], int(row["res_j"])),
                row["condition"],
                float(row["intensity"]),
                float(row["linker_max"]),
            ))
        except (ValueError, TypeError) as e:
            raise TableFormatError(n, str(e)) from None
    return out


# ---------------------------------------------------------------------------
# HDX-MS
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HdxPeptide:
    chain: str
    start: int
    end: int
    state: str
    uptake: float
    sd: float

    def __post_init__(self):
        if self.start > self.end:
            raise MSDataError(f"peptide {self.chain}:{self.start}-{self.end} has start > end")
        if not 0.0 <= self.uptake <= 1.0:
            raise MSDataError(f"uptake {self.uptake} outside [0, 1]")
        if not self.sd >= 0:
            raise MSDataError(f"negative sd {self.sd}")

    @property
    def length(self) -> int:
        return self.end - self.start + 1


def filter_peptides(peptides: list[HdxPeptide], factor: float = PEPTIDE_SD_FACTOR):
    """Split into (kept, excluded); a peptide is excluded when its SD is
    strictly greater than ``factor`` times the mean SD of its state."""
    if not peptides:
        raise MSDataError("no peptides")
    by_state: dict[str, list[float]] = defaultdict(list)
    for p in peptides:
        by_state[p.state].append(p.sd)
    mean_sd = {s: sum(v) / len(v) for s, v in by_state.items()}
    kept, excluded = [], []
    for p in peptides:
        (excluded if p.sd > factor * mean_sd[p.state] else kept).append(p)
    return kept, excluded


@dataclass
class ResidueUptake:
    uptake: dict  # state -> {ResidueRef: float}
    coverage: dict  # state -> {ResidueRef: int}

    def state(self, name: str) -> dict:
        return self.uptake.get(name, {})


def residue_uptake(peptides: list[HdxPeptide], weighting: str = "inverse_length") -> ResidueUptake:
    """Weighted mean uptake of all peptides covering each residue, per state.

    A residue covered by a single peptide takes that peptide's uptake exactly.
    """
    if weighting not in ("inverse_length", "uniform"):
        raise ValueError("weighting must be 'inverse_length' or 'uniform'")
    terms: dict = defaultdict(lambda: defaultdict(list))
    for p in peptides:
        n = p.length if weighting == "inverse_length" else 1
        for r in range(p.start, p.end + 1):
            terms[p.state][ResidueRef(p.chain, r)].append((p.uptake, n))
    uptake, coverage = {}, {}
    for state, per_res in terms.items():
        uptake[state] = {}
        coverage[state] = {}
        for ref in sorted(per_res):
            t = per_res[ref]
            if len(t) == 1:
                uptake[state][ref] = t[0][0]
            else:
                uptake[state][ref] = math.fsum(u / n for u, n in t) / math.fsum(1 / n for _, n in t)
            coverage[state][ref] = len(t)
    return ResidueUptake(uptake, coverage)


def _as_map(u) -> dict:
    if isinstance(u, ResidueUptake):
        if len(u.uptake) != 1:
            raise MSDataError(f"expected a single-state uptake, got states {sorted(u.uptake)}")
        return next(iter(u.uptake.values()))
    return u


def protection(uptake_complex, uptake_reference) -> dict:
    """Reference minus complex uptake over the shared coverage.

    Either argument may be a ``{ResidueRef: uptake}`` map or a single-state
    :class:`ResidueUptake`.
    """
    c, r = _as_map(uptake_complex), _as_map(uptake_reference)
    return {k: r[k] - c[k] for k in sorted(c) if k in r}


def classify_protection(uptake_complex, uptake_reference, partner_chains: dict | None = None,
                        threshold: float = PROTECTION_THRESHOLD):
    """Protected residues (protection > threshold) as burial and contact restraints.

    ``partner_chains`` maps a chain id to the chains a protected residue on it
    should contact; without it only burial restraints are emitted.
    Returns ``(constraints, protection_by_residue, labels)`` with labels
    "protected" / "exposed" / "boundary".
    """
    prot = protection(uptake_complex, uptake_reference)
    out, labels = [], {}
    for ref, v in prot.items():
        if v > threshold:
            labels[ref] = "protected"
            delta = min(1.0, v)
            out.append(HdxBurial(ref, delta))
            for p in (partner_chains or {}).get(ref.chain_id, []):
                out.append(HdxProxy(ref, p, delta))
        elif v < threshold:
            labels[ref] = "exposed"
        else:
            labels[ref] = "boundary"
    return ConstraintSet(out), prot, labels


def read_hdx_csv(text: str) -> list[HdxPeptide]:
    """Rows ``chain,start,end,state,uptake,sd``."""
    cols = ["chain", "start", "end", "state", "uptake", "sd"]
    out = []
    for n, row in _rows(text, cols):
        try:
            out.append(HdxPeptide(row["chain"], int(row["start"]), int(row["end"]), row["state"],
                                  float(row["uptake"]), float(row["sd"])))
        except (ValueError, TypeError) as e:
            raise TableFormatError(n, str(e)) from None
    return out


def _rows(text: str, cols: list[str]):
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        return
    missing = [c for c in cols if c not in reader.fieldnames]
    if missing:
        raise TableFormatError(1, f"missing columns {missing}")
    for n, row in enumerate(reader, start=2):
        if None in row or any(row[c] is None or row[c].strip() == "" for c in cols):
            raise TableFormatError(n, "wrong number of fields")
        yield n, {c: row[c].strip() for c in cols}


# ---------------------------------------------------------------------------
# iterative subset search
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SubsetConfig:
    n_subsets: int = 8
    subset_size: int | None = None  # None: ceil(|pool| / 3)
    keep_fraction: float = 0.25
    n_rounds: int = 3
    seed: int = 0
    # constraints added to the surviving union per candidate in later rounds
    fresh_per_subset: int = 1
    max_workers: int = 1

    def __post_init__(self):
        if self.n_subsets < 1 or self.n_rounds < 1 or self.fresh_per_subset < 1:
            raise ValueError("n_subsets, n_rounds and fresh_per_subset must be >= 1")
        if not 0.0 < self.keep_fraction <= 1.0:
            raise ValueError("keep_fraction must lie in (0, 1]")

    def resolved_size(self, pool_size: int) -> int:
        size = self.subset_size if self.subset_size is not None else math.ceil(pool_size / 3)
        return max(1, min(size, pool_size))

    def n_keep(self) -> int:
        return max(1, math.ceil(self.keep_fraction * self.n_subsets))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SubsetSearchState:
    pool: ConstraintSet
    subsets: list = field(default_factory=list)  # per round: list of sorted index tuples
    scores: list = field(default_factory=list)  # per round: list of float
    kept: list = field(default_factory=list)  # per round: indices into that round's subsets
    errors: list = field(default_factory=list)  # (round, subset, message)
    surviving_union: tuple = ()
    round: int = 0

    def to_dict(self) -> dict:
        return {
            "rounds": [
                {"subsets": [list(s) for s in subs], "scores": sc, "kept": kp}
                for subs, sc, kp in zip(self.subsets, self.scores, self.kept)
            ],
            "errors": [list(e) for e in self.errors],
            "surviving_union": list(self.surviving_union),
            "round": self.round,
        }


def _sample(rng: np.random.Generator, candidates: list[int], size: int) -> list[int]:
    size = min(size, len(candidates))
    return sorted(int(c) for c in rng.choice(candidates, size=size, replace=False))


def subset_search(pool: ConstraintSet, generate: Callable, evaluate: Callable,
                  cfg: SubsetConfig = SubsetConfig()):
    """Generate-evaluate-recombine search for a mutually consistent subset.

    Round 1 scores ``n_subsets`` random subsets of the pool.  Each later
    round scores the surviving union itself plus candidates extending it by
    ``fresh_per_subset`` unused pool constraints, so an extension is only
    adopted when it does not lower satisfaction.  After every round the kept
    subsets join the surviving union.  Kept means: every subset with perfect
    satisfaction, or otherwise the best-scoring subsets up to
    ``ceil(keep_fraction * n_subsets)`` (ties by subset index) excluding any
    below the round's best score.

    ``generate(subset: ConstraintSet, seed: int)`` returns a model and
    ``evaluate(model, subset: ConstraintSet)`` its satisfaction in [0, 1].
    Both are called once per subset, concurrently when ``max_workers > 1``.
    A callback exception scores the subset 0 and is recorded.
    Returns ``(final ConstraintSet, SubsetSearchState)``.
    """
    if len(pool) == 0:
        raise MSDataError("empty constraint pool")
    n = len(pool)
    size = cfg.resolved_size(n)
    rng = np.random.default_rng(cfg.seed)
    state = SubsetSearchState(pool)
    union: list[int] = []

    def run(job):
        r, k, idx = job
        sub = pool.subset(idx)
        try:
            model = generate(sub, int(cfg.seed * 1_000_003 + r * 1009 + k))
            score = float(evaluate(model, sub))
            if not 0.0 <= score <= 1.0:
                raise MSDataError(f"satisfaction {score} outside [0, 1]")
            return score, None
        except Exception as e:  # noqa: BLE001 - any callback failure scores 0
            return 0.0, f"{type(e).__name__}: {e}"

    for r in range(cfg.n_rounds):
        if r == 0:
            subsets = [tuple(_sample(rng, list(range(n)), size)) for _ in range(cfg.n_subsets)]
        else:
            fresh = [k for k in range(n) if k not in union]
            if not fresh:
                break
            # spread the fresh constraints over candidates before repeating any
            order = [int(v) for v in rng.permutation(fresh)]
            subsets = [tuple(union)]
            for k in range(cfg.n_subsets - 1):
                picks = [order[(k * cfg.fresh_per_subset + q) % len(order)] for q in range(cfg.fresh_per_subset)]
                cand = tuple(sorted(set(union) | set(picks)))
                if cand not in subsets:
                    subsets.append(cand)
        jobs = [(r, k, s) for k, s in enumerate(subsets)]
        if cfg.max_workers > 1:
            with ThreadPoolExecutor(cfg.max_workers) as ex:
                results = list(ex.map(run, jobs))
        else:
            results = [run(j) for j in jobs]
        scores = [s for s, _ in results]
        for k, (_, err) in enumerate(results):
            if err is not None:
                log.warning("round %d subset %d failed: %s", r, k, err)
                state.errors.append((r, k, err))
        best = max(scores)
        ranked = sorted(range(len(subsets)), key=lambda k: (-scores[k], k))
        if best == 1.0:
            kept = [k for k in ranked if scores[k] == 1.0]
        else:
            kept = [k for k in ranked[:cfg.n_keep()] if scores[k] == best]
        union = sorted(set(union).union(*(subsets[k] for k in kept)))
        state.subsets.append(subsets)
        state.scores.append(scores)
        state.kept.append(kept)
        state.surviving_union = tuple(union)
        state.round = r + 1
    return pool.subset(union), state
