"""``ms-steer`` command line.

Exit codes: 0 success, 1 constraint-resolution or divergence failure,
2 bad input or configuration.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import __version__, constraints as cio, engine, evaluate, fixtures, msdata, pipeline, synth
from .config import ConfigError, RunConfig
from .constraints import FAMILIES, ConstraintFormatError, ConstraintSet
from .structure import ResolutionError, StructureError, read_pdb, write_pdb

log = logging.getLogger("ms_steer")

MANIFEST_FORMAT = "ms-steer/manifest/1"
EXIT_OK, EXIT_FAILURE, EXIT_INPUT = 0, 1, 2


class InputError(ValueError):
    pass


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _input_record(path) -> dict:
    return {"path": str(path), "sha256": sha256(path)}


def _dump(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _require(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"no such file: {path}")
    return p


def _load_config(args) -> RunConfig:
    return RunConfig.load(_require(args.config)) if getattr(args, "config", None) else RunConfig()


def parse_weights(text: str) -> dict:
    """``"xl_pos=1,hdx_burial=0.5"`` or ``"all=0"`` into a full family map."""
    out = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        name, sep, value = item.partition("=")
        if not sep:
            raise InputError(f"--weights entry {item!r} is not name=value")
        try:
            w = float(value)
        except ValueError:
            raise InputError(f"--weights value {value!r} is not a number") from None
        if name == "all":
            out.update(dict.fromkeys(FAMILIES, w))
        elif name in FAMILIES:
            out[name] = w
        else:
            raise InputError(f"--weights: unknown family {name!r}; expected one of {FAMILIES} or 'all'")
    return out


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_fixture(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fx = fixtures.two_basin(args.n_per_chain)
    write_pdb(fx.basin_a, out / "basin_a.pdb")
    write_pdb(fx.basin_b, out / "basin_b.pdb")
    print(f"wrote {out / 'basin_a.pdb'} and {out / 'basin_b.pdb'}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    overrides = {}
    if args.xl_threshold is not None:
        overrides["xl_threshold"] = args.xl_threshold
    if args.n_false is not None:
        overrides["n_false_constraints"] = args.n_false
    scfg = replace(cfg.synth, **overrides)
    truth = read_pdb(_require(args.truth))
    inputs = {"truth": _input_record(args.truth)}
    cons = list(synth.simulate_crosslinks(truth, scfg))
    if args.truth_b:
        truth_b = read_pdb(_require(args.truth_b))
        inputs["truth_b"] = _input_record(args.truth_b)
        cons += synth.simulate_negative_links(truth, truth_b, scfg)
    if not args.no_hdx:
        cons += synth.simulate_hdx(truth, truth, scfg)
    noisy = synth.inject_noise(ConstraintSet(cons), truth, scfg, args.seed)
    cio.save(ConstraintSet(noisy.constraints.constraints), args.output)
    prov = {
        "format": MANIFEST_FORMAT,
        "command": "simulate",
        "version": __version__,
        "inputs": inputs,
        "synth": scfg.to_dict(),
        "seed": args.seed,
        "labels": noisy.constraints.provenance,
        "families": noisy.constraints.families(),
        "false_requested": noisy.n_requested,
        "false_added": noisy.n_added,
    }
    _dump(prov, args.provenance or Path(args.output).with_suffix(".provenance.json"))
    print(f"{len(noisy.constraints)} constraints -> {args.output}")
    return EXIT_OK


def _partner_map(specs, chains) -> dict:
    if specs:
        out = {}
        for s in specs:
            c, sep, rest = s.partition("=")
            if not sep or not c or not rest:
                raise InputError(f"--partner {s!r} is not CHAIN=PARTNER[,PARTNER]")
            out[c] = [p for p in rest.split(",") if p]
        return out
    return {c: [p for p in sorted(chains) if p != c] for c in chains}


def cmd_derive(args) -> int:
    cfg = _load_config(args).derive
    if not args.xl and not args.hdx:
        raise InputError("derive needs --xl and/or --hdx")
    out = ConstraintSet()
    dlog = {"format": MANIFEST_FORMAT, "command": "derive", "version": __version__,
            "config": {k: v for k, v in vars(cfg).items()}, "inputs": {}}
    chains = set()
    if args.xl:
        ms = msdata.read_xl_csv(_require(args.xl).read_text())
        dlog["inputs"]["xl"] = _input_record(args.xl)
        if ms:
            xl = msdata.derive_xl_constraints(ms, cfg.state_a, cfg.state_b, cfg.enrich_ratio, cfg.linker_max)
            out = out + xl
            dlog["xl"] = {"measurements": len(ms), "constraints": xl.families()}
            chains |= {r.chain_id for m in ms for r in (m.residue_i, m.residue_j)}
    if args.hdx:
        peps = msdata.read_hdx_csv(_require(args.hdx).read_text())
        dlog["inputs"]["hdx"] = _input_record(args.hdx)
        if peps:
            kept, excluded = msdata.filter_peptides(peps, cfg.peptide_sd_factor)
            up = msdata.residue_uptake(kept, cfg.weighting)
            for s in (cfg.hdx_complex_state, cfg.hdx_reference_state):
                if s not in up.uptake:
                    raise InputError(f"HDX state {s!r} not in table (have {sorted(up.uptake)})")
            chains |= {p.chain for p in peps}
            partners = _partner_map(args.partner, chains)
            hdx, prot, labels = msdata.classify_protection(
                up.state(cfg.hdx_complex_state), up.state(cfg.hdx_reference_state), partners,
                cfg.protection_threshold)
            out = out + hdx
            dlog["hdx"] = {
                "peptides": len(peps),
                "excluded": [vars(p) for p in excluded],
                "protection": {str(r): v for r, v in prot.items()},
                "labels": {str(r): v for r, v in labels.items()},
                "constraints": hdx.families(),
            }
    cio.save(out, args.output)
    _dump(dlog, args.log or Path(args.output).with_suffix(".derive.json"))
    print(f"{len(out)} constraints -> {args.output}")
    return EXIT_OK


def _build_denoiser(paths, template, cfg: RunConfig) -> engine.MixtureDenoiser:
    import numpy as np

    refs = []
    for p in paths:
        s = read_pdb(_require(p))
        if s.n_atoms != template.n_atoms:
            raise InputError(f"reference {p} has {s.n_atoms} atoms, template has {template.n_atoms}")
        refs.append(s.coords())
    w = cfg.denoiser.component_weights
    return engine.MixtureDenoiser(np.stack(refs), None if w is None else list(w), cfg.denoiser.tau_sq)


def _steer_one(seed: int, cfg: RunConfig, template, cs, indices, denoiser, inputs, out_dir: Path,
               search_record) -> Path:
    sampler = replace(cfg.sampler, seed=seed)
    res = engine.reverse_sample(denoiser, template, cs, cfg.potentials, cfg.schedules, sampler)
    model = res.structure(template)
    stem = f"model_s{seed:04d}"
    pdb_path = out_dir / f"{stem}.pdb"
    write_pdb(model, pdb_path)
    sat = evaluate.satisfaction(model, cs) if len(cs) else evaluate.SatisfactionReport()
    manifest = {
        "format": MANIFEST_FORMAT,
        "command": "steer",
        "version": __version__,
        "config": cfg.to_dict(),
        "inputs": inputs,
        "seed": seed,
        "constraint_indices": indices,
        "subset_search": search_record,
        "output": {"pdb": pdb_path.name, "sha256": sha256(pdb_path)},
        "final_energies": res.final_energies,
        "satisfaction": sat.to_dict(),
        "log": res.log_dicts(),
    }
    _dump(manifest, out_dir / f"{stem}.manifest.json")
    return pdb_path


def cmd_steer(args) -> int:
    if args.replay:
        return _replay(args)
    if not args.template or not args.constraints:
        raise InputError("steer needs TEMPLATE and CONSTRAINTS (or --replay MANIFEST)")
    cfg = _load_config(args)
    if args.weights:
        cfg.sampler = replace(cfg.sampler, family_weights={**cfg.sampler.family_weights,
                                                           **parse_weights(args.weights)})
    if args.max_workers is not None:
        cfg.max_workers = args.max_workers
    template = read_pdb(_require(args.template))
    pool = cio.load(_require(args.constraints))
    refs = args.references or [args.template]
    inputs = {"template": _input_record(args.template), "constraints": _input_record(args.constraints),
              "references": [_input_record(p) for p in refs]}
    denoiser = _build_denoiser(refs, template, cfg)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    indices = list(range(len(pool)))
    search_record = None
    if args.subset_search:
        if len(pool) == 0:
            raise InputError("--subset-search needs a non-empty constraint file")
        scfg = replace(cfg.subset, max_workers=cfg.max_workers)
        final, state = pipeline.run_subset_search(pool, denoiser, template, cfg.potentials, cfg.schedules,
                                                  cfg.sampler, scfg, cfg.subset_callbacks)
        indices = list(state.surviving_union)
        search_record = state.to_dict()
        _dump({"format": MANIFEST_FORMAT, "command": "subset_search", "config": scfg.to_dict(),
               **search_record}, out_dir / "subset_search.json")
        print(f"subset search kept {len(indices)}/{len(pool)} constraints")
    cs = pool.subset(indices)
    seeds = [args.seed_start + k for k in range(args.seeds)]

    def job(seed):
        return _steer_one(seed, cfg, template, cs, indices, denoiser, inputs, out_dir, search_record)

    if cfg.max_workers > 1:
        with ThreadPoolExecutor(cfg.max_workers) as ex:
            paths = list(ex.map(job, seeds))
    else:
        paths = [job(s) for s in seeds]
    for p in paths:
        print(p)
    return EXIT_OK


def _replay(args) -> int:
    m = json.loads(_require(args.replay).read_text())
    if m.get("format") != MANIFEST_FORMAT or m.get("command") != "steer":
        raise InputError(f"{args.replay} is not a steer manifest")
    inputs = m["inputs"]
    recs = [inputs["template"], inputs["constraints"], *inputs["references"]]
    for rec in recs:
        if sha256(_require(rec["path"])) != rec["sha256"]:
            raise InputError(f"input {rec['path']} changed since the original run (sha256 mismatch)")
    cfg = RunConfig.from_dict(m["config"])
    template = read_pdb(inputs["template"]["path"])
    pool = cio.load(inputs["constraints"]["path"])
    denoiser = _build_denoiser([r["path"] for r in inputs["references"]], template, cfg)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    indices = m["constraint_indices"]
    p = _steer_one(m["seed"], cfg, template, pool.subset(indices), indices, denoiser, inputs, out_dir,
                   m["subset_search"])
    print(p)
    return EXIT_OK


def _read_scores(path, names) -> list[float]:
    import csv

    rows = list(csv.DictReader(_require(path).read_text().splitlines()))
    if not rows or not {"model", "score"} <= set(rows[0]):
        raise InputError(f"{path}: expected columns model,score")
    table = {}
    for n, r in enumerate(rows, start=2):
        try:
            table[r["model"]] = float(r["score"])
        except (TypeError, ValueError):
            raise InputError(f"{path}: row {n}: bad score {r.get('score')!r}") from None
    missing = [n for n in names if n not in table]
    if missing:
        raise InputError(f"{path}: no score for {missing}")
    return [table[n] for n in names]


def cmd_evaluate(args) -> int:
    paths = [_require(p) for p in args.models]
    models = [read_pdb(p) for p in paths]
    names = [p.name for p in paths]
    cs = cio.load(_require(args.constraints))
    scores = _read_scores(args.external_scores, names) if args.external_scores else None
    ranking = evaluate.rank_models(models, cs, scores)
    acc = None
    if args.reference:
        if not (args.receptor and args.ligand):
            raise InputError("--reference needs --receptor and --ligand chain ids")
        ref = read_pdb(_require(args.reference))
        acc = [evaluate.accuracy(m, ref, args.receptor, args.ligand, args.interface_cutoff,
                                 None if scores is None else scores[k]) for k, m in enumerate(models)]
    rows = evaluate.ranking_rows(ranking, names, acc)
    summary = ranking.summary()
    summary["best_model"] = names[ranking.best]
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    Path(f"{prefix}.csv").write_text(evaluate.rows_to_csv(rows))
    report = {"ranking": rows, "summary": summary,
              "satisfaction": {names[k]: r.to_dict() for k, r in enumerate(ranking.reports)}}
    if acc is not None:
        report["accuracy"] = {names[k]: a.to_dict() for k, a in enumerate(acc)}
    Path(f"{prefix}.json").write_text(evaluate.to_json(report) + "\n")
    print(_summary_table(summary, names[ranking.best], len(models)))
    return EXIT_OK


def _summary_table(summary: dict, best_name: str, n: int) -> str:
    def f(v):
        return "n/a" if v is None else f"{v:.1f}"

    lines = [f"best of {n}: {best_name}", f"{'family':<8} {'best':>7} {'mean':>7} {'sd':>7}"]
    for key, label in (("xl_pct", "XL"), ("hdx_pct", "HDX"), ("overall", "overall")):
        s = summary[key]
        lines.append(f"{label:<8} {f(s['best']):>7} {f(s['mean']):>7} {f(s['sd']):>7}")
    return "\n".join(lines)


def _pdbs(d) -> list[Path]:
    p = Path(d)
    if not p.is_dir():
        raise InputError(f"not a directory: {d}")
    files = sorted(p.glob("*.pdb"))
    if not files:
        raise InputError(f"no .pdb files in {d}")
    return files


def cmd_compare(args) -> int:
    g, n = _pdbs(args.guided_dir), _pdbs(args.naive_dir)
    cs = cio.load(_require(args.constraints))
    rows = evaluate.posthoc_compare([read_pdb(p) for p in g], [read_pdb(p) for p in n], cs)
    names = {"guided": [p.name for p in g], "naive": [p.name for p in n]}
    for r in rows:
        r["model"] = names[r["source"]][r["index"]]
    cols = ["rank", "source", "model", "xl_pct", "hdx_pct", "average"]
    Path(args.output).write_text(evaluate.rows_to_csv(rows, cols))
    print(f"{len(rows)} rows -> {args.output}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ms-steer", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--print-defaults", action="store_true", help="print the default run configuration and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command")

    s = sub.add_parser("fixture", help="write the two-basin toy complex as PDB files")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--n-per-chain", type=int, default=20)
    s.set_defaults(func=cmd_fixture)

    s = sub.add_parser("simulate", help="synthetic restraints from a truth structure")
    s.add_argument("truth")
    s.add_argument("--truth-b", help="second state; links seen only there become negatives")
    s.add_argument("-c", "--config")
    s.add_argument("--xl-threshold", type=float)
    s.add_argument("--n-false", type=int, help="number of violated links to inject")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--no-hdx", action="store_true")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--provenance")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("derive", help="restraints from XL-MS and HDX-MS tables")
    s.add_argument("--xl")
    s.add_argument("--hdx")
    s.add_argument("--partner", action="append",
                   help="CHAIN=PARTNER[,PARTNER] for HDX contact restraints (default: all other chains)")
    s.add_argument("-c", "--config")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--log")
    s.set_defaults(func=cmd_derive)

    s = sub.add_parser("steer", help="guided sampling")
    s.add_argument("template", nargs="?")
    s.add_argument("constraints", nargs="?")
    s.add_argument("--references", nargs="+", help="PDB files defining the mixture denoiser (default: template)")
    s.add_argument("--seeds", type=int, default=1)
    s.add_argument("--seed-start", type=int, default=0)
    s.add_argument("--weights", help="per-family multipliers, e.g. xl_pos=1,hdx_burial=0 or all=0")
    s.add_argument("--subset-search", action="store_true")
    s.add_argument("--max-workers", type=int)
    s.add_argument("--replay", help="re-run one trajectory from its manifest")
    s.add_argument("-c", "--config")
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_steer)

    s = sub.add_parser("evaluate", help="rank models by restraint satisfaction")
    s.add_argument("models", nargs="+")
    s.add_argument("--constraints", required=True)
    s.add_argument("--reference")
    s.add_argument("--receptor")
    s.add_argument("--ligand")
    s.add_argument("--interface-cutoff", type=float, default=evaluate.DEFAULT_INTERFACE_CUTOFF)
    s.add_argument("--external-scores", help="CSV with columns model,score")
    s.add_argument("--out-prefix", default="report")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("compare", help="rank guided against unguided models")
    s.add_argument("guided_dir")
    s.add_argument("naive_dir")
    s.add_argument("constraints")
    s.add_argument("-o", "--output", default="ranking.csv")
    s.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.print_defaults:
        sys.stdout.write(RunConfig().dumps())
        return EXIT_OK
    if not args.command:
        parser.print_usage(sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except (ResolutionError, engine.DivergenceError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE
    except (InputError, ConfigError, ConstraintFormatError, msdata.MSDataError, StructureError,
            evaluate.EvaluationError, evaluate.NoInterfaceError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
