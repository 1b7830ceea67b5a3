"""Acceptance criteria, one test each.

Every test prints a single ``[PASS]`` / ``[FAIL]`` line with the measured
quantity, visible in ``pytest -v`` output without ``-s``.  Run this file
directly (``python tests/test_acceptance.py``) for the same report without
pytest's summary.
"""

from __future__ import annotations

import json
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

sys.path.insert(0, str(Path(__file__).parent))

from helpers import backbone_helix, fd_gradient, grad_rel_error, mixed_constraints, random_complex  # noqa: E402
from ms_steer import engine, evaluate, fixtures, geometry, msdata, pipeline, synth  # noqa: E402
from ms_steer import potentials as pot  # noqa: E402
from ms_steer import schedule as sch  # noqa: E402
from ms_steer.cli import main as cli_main  # noqa: E402
from ms_steer.constraints import FAMILIES, ConstraintSet, HdxBurial, HdxProxy, XlPositive  # noqa: E402
from ms_steer.structure import ResidueRef  # noqa: E402

# tolerances and thresholds
GRAD_RTOL = 1e-5
GRAD_FLOOR = 1e-8
FD_STEP = 1e-4
N_GRAD_CONFIGS = 100
GRAD_TIME_LIMIT = 30.0

N_BASIN_SEEDS = 100
UNGUIDED_B_RANGE = (0.35, 0.65)
GUIDED_B_MIN = 0.90
GUIDED_XL_SAT_MIN = 95.0
BASIN_TIME_LIMIT = 300.0

DECAY_RATIO = 0.01
DECAY_MIN_SEEDS = 95

N_SUBSET_SEEDS = 20
SUBSET_PLANTED_MIN = 7
SUBSET_FALSE_MAX = 1
SUBSET_TIME_LIMIT = 600.0

METRIC_TOL = 1e-6
SASA_SPHERE_RTOL = 0.02
SASA_DOUBLING_RTOL = 0.02


def report(capsys, number: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title} -- {detail}"
    if capsys is None:
        print(line)
    else:
        with capsys.disabled():
            print("\n" + line)
    assert ok, line


# ---------------------------------------------------------------------------

def test_01_gradient_correctness(capsys):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = dict.fromkeys(["u_dist", "u_neg", "hdx_proxy_potential", "burial_loss", "total_potential"], 0.0)
    fam_of = {"u_dist": "xl_pos", "u_neg": "xl_neg", "hdx_proxy_potential": "hdx_proxy",
              "burial_loss": "hdx_burial"}
    for _ in range(N_GRAD_CONFIGS):
        s = random_complex(rng)
        cs = mixed_constraints(rng, s)
        cc = pot.CompiledConstraints(s, cs)
        x = s.coords()
        analytic = {
            "u_dist": pot.u_dist(s, cs.of(XlPositive)),
            "u_neg": pot.u_neg(s, [c for c in cs if type(c).__name__ == "XlNegative"]),
            "hdx_proxy_potential": pot.hdx_proxy_potential(s, cs.of(HdxProxy)),
            "burial_loss": pot.burial_loss(s, cs.of(HdxBurial)),
            "total_potential": pot.total_potential(s, cs),
        }
        ones = dict.fromkeys(FAMILIES, 1.0)
        for name, rep in analytic.items():
            if name == "total_potential":
                f = lambda y: cc.total(y, ones)[0].total_energy  # noqa: E731
            else:
                f = lambda y, fam=fam_of[name]: cc.family(fam, y).total_energy  # noqa: E731
            assert math.isclose(f(x), rep.total_energy, rel_tol=1e-12, abs_tol=1e-12)
            err = grad_rel_error(rep.gradient, fd_gradient(f, x, FD_STEP), GRAD_FLOOR)
            worst[name] = max(worst[name], err)
    elapsed = time.perf_counter() - t0
    ok = all(v <= GRAD_RTOL for v in worst.values()) and elapsed < GRAD_TIME_LIMIT
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f"; {elapsed:.1f}s"
    report(capsys, 1, "analytic gradients match central differences", ok, detail)


def test_02_schedule_exactness(capsys):
    hdx = {1.0: 0.0, 0.97: 0.0, 0.95: 0.5, 0.8: 0.5, 0.75: 0.5, 0.7: 2.0, 0.5: 2.0, 0.25: 2.0, 0.0: 2.0}
    xl = {1.0: 0.0, 0.95: 0.0, 0.8: 0.0, 0.75: 0.5, 0.7: 0.5, 0.5: 0.5, 0.25: 1.0, 0.1: 1.0, 0.0: 1.0}
    bad = [f"hdx({t})={sch.hdx_weight(t)}" for t, w in hdx.items() if sch.hdx_weight(t) != w]
    bad += [f"xl({t})={sch.xl_weight_fraction(t)}" for t, w in xl.items() if sch.xl_weight_fraction(t) != w]
    ends = (sch.union_lambda(0.0), sch.union_lambda(1.0))
    intervals = (sch.HDX_SCHEDULE.eval_interval, sch.XL_SCHEDULE.eval_interval)
    ok = not bad and ends == (8.0, 0.0) and intervals == (1, 4)
    detail = f"{len(hdx) + len(xl)} probes, mismatches {bad or 'none'}; union_lambda(0,1)={ends}; intervals {intervals}"
    report(capsys, 2, "stage weights and ramp endpoints exact", ok, detail)


def _basin_constraints(fx):
    return ConstraintSet(synth.simulate_crosslinks(fx.basin_b, synth.SynthConfig(
        xl_threshold=fixtures.FIXTURE_XL_THRESHOLD)))


def test_03_two_basin_steering(capsys):
    fx = fixtures.two_basin()
    cs = _basin_constraints(fx)
    t0 = time.perf_counter()
    unguided, guided, sats = [], [], []
    for seed in range(N_BASIN_SEEDS):
        cfg = engine.SamplerConfig(seed=seed)
        unguided.append(fixtures.basin_of(fx, engine.reverse_sample(fx.denoiser, fx.template, None,
                                                                    config=cfg).coords))
        res = engine.reverse_sample(fx.denoiser, fx.template, cs, config=cfg)
        guided.append(fixtures.basin_of(fx, res.coords))
        sats.append(evaluate.xl_satisfaction(res.structure(fx.template), cs).xl_pct)
    elapsed = time.perf_counter() - t0
    fu = unguided.count("B") / N_BASIN_SEEDS
    fg = guided.count("B") / N_BASIN_SEEDS
    sat = float(np.mean(sats))
    ok = (UNGUIDED_B_RANGE[0] <= fu <= UNGUIDED_B_RANGE[1] and fg >= GUIDED_B_MIN
          and sat >= GUIDED_XL_SAT_MIN and elapsed < BASIN_TIME_LIMIT)
    detail = (f"{len(cs)} links; unguided B {fu:.2f}, guided B {fg:.2f}, "
              f"mean XL satisfaction {sat:.1f}%; {elapsed:.1f}s")
    report(capsys, 3, "guidance selects the restrained basin", ok, detail)


def test_04_energy_decay(capsys):
    fx = fixtures.single_basin()
    link = XlPositive(ResidueRef("A", 1), ResidueRef("B", 20), 0.0, 10.0)
    d0 = geometry.ca_distance(fx.basin_a, link.i, link.j)
    assert d0 > link.d_max
    cs = ConstraintSet([link])
    good, ratios = 0, []
    for seed in range(100):
        res = engine.reverse_sample(fx.denoiser, fx.template, cs, config=engine.SamplerConfig(seed=seed))
        first = next(s for s in res.log if s.applied["xl_pos"])
        e0, e1 = first.energies["xl_pos"], res.final_energies["xl_pos"]
        ratios.append(e1 / e0 if e0 > 0 else 0.0)
        good += e1 <= DECAY_RATIO * e0
    ok = good >= DECAY_MIN_SEEDS
    detail = (f"reference distance {d0:.1f} A vs bound {link.d_max}; {good}/100 seeds decay to <= 1%; "
              f"worst final/first ratio {max(ratios):.2e}")
    report(capsys, 4, "restraint energy decays along the trajectory", ok, detail)


def test_05_subset_recovery(capsys):
    fx = fixtures.two_basin()
    cfg = synth.SynthConfig(xl_threshold=fixtures.FIXTURE_XL_THRESHOLD, n_false_constraints=4)
    links = synth.simulate_crosslinks(fx.basin_b, cfg)
    t0 = time.perf_counter()
    planted, false = [], []
    for seed in range(N_SUBSET_SEEDS):
        rng = np.random.default_rng(seed)
        chosen = [links[k] for k in sorted(rng.choice(len(links), 8, replace=False))]
        pool = synth.inject_noise(chosen, fx.basin_b, cfg, seed).constraints
        final, _ = pipeline.run_subset_search(pool, fx.denoiser, fx.template,
                                              search=msdata.SubsetConfig(seed=seed))
        planted.append(final.provenance.count("planted"))
        false.append(final.provenance.count("false"))
    elapsed = time.perf_counter() - t0
    mp, mf = float(np.median(planted)), float(np.median(false))
    ok = mp >= SUBSET_PLANTED_MIN and mf <= SUBSET_FALSE_MAX and elapsed < SUBSET_TIME_LIMIT
    detail = f"median planted {mp:g}/8, median false {mf:g}/4 over {N_SUBSET_SEEDS} seeds; {elapsed:.1f}s"
    report(capsys, 5, "subset search keeps planted and drops false links", ok, detail)


def test_06_hdx_pipeline_exactness(capsys):
    R = ResidueRef
    pep = lambda s, e, u, sd, st="apo": msdata.HdxPeptide("A", s, e, st, u, sd)  # noqa: E731
    checks = {}
    peps = [pep(1, 5, 0.2, 0.1), pep(6, 9, 0.2, 0.1), pep(10, 12, 0.2, 1.1)]
    checks["sd filter 0.1/0.1/1.1"] = msdata.filter_peptides(peps)[1] == [peps[2]]
    same = [pep(1, 5, 0.2, 0.3)] * 3
    checks["equal sds kept"] = msdata.filter_peptides(same)[1] == []
    checks["single sd 0 kept"] = msdata.filter_peptides([pep(1, 2, 0.1, 0.0)])[1] == []
    edge = [pep(1, 2, 0.1, v) for v in (0.25, 0.25, 0.0, 0.0, 0.5)]
    checks["sd == 2.5 mean kept"] = msdata.filter_peptides(edge)[1] == []
    up = msdata.residue_uptake([pep(1, 5, 0.2, 0.1), pep(1, 10, 0.8, 0.1)]).state("apo")
    checks["weighted mean 0.4"] = up[R("A", 3)] == (0.2 / 5 + 0.8 / 10) / (1 / 5 + 1 / 10)
    checks["single source identity"] = up[R("A", 7)] == 0.8
    gap = msdata.residue_uptake([pep(1, 3, 0.2, 0.1), pep(7, 9, 0.5, 0.1)]).state("apo")
    checks["gap absent"] = R("A", 5) not in gap
    cs, prot, labels = msdata.classify_protection({R("A", 1): 0.4, R("A", 2): 0.0, R("A", 3): 0.7},
                                                  {R("A", 1): 0.5, R("A", 2): 0.05, R("A", 3): 0.5},
                                                  {"A": ["B"]})
    checks["protection 0.10 protected"] = labels[R("A", 1)] == "protected" and cs[0].delta == prot[R("A", 1)]
    checks["protection 0.05 not protected"] = labels[R("A", 2)] != "protected"
    checks["deprotection exposed"] = labels[R("A", 3)] == "exposed"
    checks["only one residue emitted"] = {c.residue for c in cs} == {R("A", 1)}
    bad = [k for k, v in checks.items() if not v]
    report(capsys, 6, "peptide filter, uptake and protection fixtures", not bad,
           f"{len(checks) - len(bad)}/{len(checks)} fixtures exact" + (f"; failed {bad}" if bad else ""))


def test_07_metric_sanity(capsys):
    fx = fixtures.two_basin()
    cfg = synth.SynthConfig(xl_threshold=fixtures.FIXTURE_XL_THRESHOLD)
    cs = synth.simulate_crosslinks(fx.basin_b, cfg) + synth.simulate_negative_links(fx.basin_b, fx.basin_a, cfg)
    h = fixtures.helix_ca(12)
    from ms_steer.structure import build_ca_structure
    close = build_ca_structure({"A": (["ALA"] * 12, h), "B": (["ALA"] * 12, h + [0.0, 6.0, 0.0])})
    hdx = synth.simulate_hdx(geometry.split_chains(close), close)
    truth_xl = evaluate.satisfaction(fx.basin_b, cs).overall
    truth_hdx = evaluate.satisfaction(close, hdx).overall
    xyz = fx.basin_a.coords().copy()
    xyz[fx.basin_a.ca_indices("B")] += [10.0, 0.0, 0.0]
    rot = Rotation.random(random_state=11).as_matrix()
    shifted = fx.basin_a.with_coords(xyz @ rot.T + [1.0, 2.0, 3.0])
    lr = evaluate.ligand_rmsd(shifted, fx.basin_a, "A", "B")
    ir = evaluate.interface_rmsd(fx.basin_a, fx.basin_a)
    rng = np.random.default_rng(5)
    P = rng.normal(size=(30, 3)) * 6
    Rm = Rotation.random(random_state=12).as_matrix()
    t = np.array([-4.0, 2.5, 11.0])
    R_fit, t_fit, _ = geometry.kabsch_superpose(P, P @ Rm.T + t)
    kabsch_err = float(np.abs(P @ R_fit.T + t_fit - (P @ Rm.T + t)).max())
    ok = (truth_xl == 100.0 and truth_hdx == 100.0 and abs(lr - 10.0) <= METRIC_TOL
          and ir <= METRIC_TOL and kabsch_err <= METRIC_TOL)
    detail = (f"truth satisfaction XL {truth_xl:g}% HDX {truth_hdx:g}% ({len(hdx)} HDX restraints); "
              f"lRMSD {lr:.9f}; iRMSD(self) {ir:.1e}; Kabsch max error {kabsch_err:.1e} A")
    report(capsys, 7, "metric sanity", ok, detail)


def test_08_sasa_quadrature(capsys):
    from ms_steer.structure import Atom, Chain, Residue, Structure

    errs = []
    for el in ("C", "N", "O", "S", "H"):
        s = Structure((Chain("A", (Residue(1, "ALA", (Atom("X", el, (0.3, -1.0, 2.0)),)),)),))
        r = geometry.VDW_RADII[el] + 1.4
        errs.append(abs(geometry.atom_sasa(s)[0] / (4 * math.pi * r * r) - 1.0))
    helix = backbone_helix(50)
    a = geometry.shrake_rupley_sasa(helix, n_points=960).sasa
    b = geometry.shrake_rupley_sasa(helix, n_points=1920).sasa
    change = float((np.abs(b - a) / a).max())
    ok = max(errs) <= SASA_SPHERE_RTOL and change < SASA_DOUBLING_RTOL and (a >= 0).all()
    detail = f"max sphere error {max(errs):.1e} over 5 radii; max per-residue change 960->1920 points {change:.4f}"
    report(capsys, 8, "SASA quadrature", ok, detail)


def test_09_determinism(tmp_path, capsys):
    import os
    import tempfile

    work = Path(tmp_path or tempfile.mkdtemp())
    cwd = os.getcwd()
    os.chdir(work)
    try:
        assert cli_main(["fixture", "--out-dir", "."]) == 0
        assert cli_main(["simulate", "basin_b.pdb", "--xl-threshold", "15", "--no-hdx", "-o", "c.json"]) == 0
        common = ["basin_a.pdb", "c.json", "--references", "basin_a.pdb", "basin_b.pdb"]
        assert cli_main(["steer", *common, "--seeds", "3", "--out-dir", "run"]) == 0
        identical = 0
        for k in range(3):
            stem = f"model_s{k:04d}"
            assert cli_main(["steer", "--replay", f"run/{stem}.manifest.json", "--out-dir", "replay"]) == 0
            identical += all((work / "run" / f"{stem}{ext}").read_bytes() == (work / "replay" / f"{stem}{ext}")
                             .read_bytes() for ext in (".pdb", ".manifest.json"))
    finally:
        os.chdir(cwd)
    fx = fixtures.two_basin()
    cs = _basin_constraints(fx)
    zero = dict.fromkeys(FAMILIES, 0.0)
    same = 0
    for seed in range(5):
        a = engine.reverse_sample(fx.denoiser, fx.template, cs, config=engine.SamplerConfig(
            seed=seed, family_weights=zero, record_trajectory=True)).trajectory
        b = engine.reverse_sample(fx.denoiser, fx.template, None, config=engine.SamplerConfig(
            seed=seed, record_trajectory=True)).trajectory
        same += bool(np.array_equal(a, b))
    ok = identical == 3 and same == 5
    detail = f"{identical}/3 replays byte-identical; {same}/5 zero-weight trajectories bit-identical to unguided"
    report(capsys, 9, "replay and zero-weight determinism", ok, detail)


def test_10_ranking_rule(capsys):
    def reps(pcts):
        return [evaluate.SatisfactionReport(xl=[evaluate.ConstraintCheck("c", 0.0, k < p) for k in range(10)])
                for p in pcts]

    fx = fixtures.two_basin()
    cs = _basin_constraints(fx)
    checks = {
        "sort 40/90/70": evaluate.rank_models([0, 1, 2], cs, reports=reps([4, 9, 7])).order == [1, 2, 0],
        "tie -> higher external score": evaluate.rank_models(
            [0, 1], cs, external_scores=[0.3, 0.6], reports=reps([10, 10])).best == 1,
        "tie -> first model": evaluate.rank_models([0, 1], cs, reports=reps([10, 10])).best == 0,
        "structures: basin B first": evaluate.rank_models([fx.basin_a, fx.basin_b, fx.basin_b], cs).order
        == [1, 2, 0],
    }
    bad = [k for k, v in checks.items() if not v]
    report(capsys, 10, "ranking rule", not bad,
           f"{len(checks) - len(bad)}/{len(checks)} fixtures" + (f"; failed {bad}" if bad else ""))


if __name__ == "__main__":
    failures = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and callable(fn):
            try:
                fn(*[None] * fn.__code__.co_argcount)
            except AssertionError:
                failures += 1
    print(json.dumps({"failed": failures}))
    sys.exit(1 if failures else 0)
