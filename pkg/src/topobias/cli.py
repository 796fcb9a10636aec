"""Command line entry point: ``topobias <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .bias import rank_generator_subsets
from .classify import KINDS, confusion_and_pairwise
from .features import FeatureMatrix
from .generators import (
    CorpusManifest,
    GeneratorSpec,
    ManifestEntry,
    import_topology,
    parse_generator_list,
)
from .pipeline import (
    CLASSIFICATION,
    FEATURES,
    FSS,
    MANIFEST,
    STAGES,
    RunConfig,
    classification_document,
    StageError,
    emit_summary,
    load_reports,
    run_pipeline,
    stage_bias,
    stage_classify,
    stage_extract,
    stage_fss,
    stage_gen,
    with_overrides,
)
from .schemas import write_json
from .topology import ExperimentConfig, format_topology

log = logging.getLogger("topobias")


def _radii(text: str) -> tuple[float, ...]:
    return tuple(float(r) for r in text.split(",") if r.strip())


def _add_experiment_flags(p: argparse.ArgumentParser, gen: bool = False):
    g = p.add_argument_group("experiment")
    g.add_argument("--area", dest="area_side", type=float, help="side D of the square area")
    g.add_argument("--radii", type=_radii, help="comma-separated radii, e.g. 5,10,20")
    g.add_argument("--quadrats", dest="quadrat_divisions", type=int, help="quadrat divisions per side")
    g.add_argument("--quantization", dest="quantization_step", type=float,
                   help="distance rounding step for the inter-node mode")
    if gen:
        g.add_argument("--nodes", type=int, help="nodes per topology")
        g.add_argument("--per-gen", dest="per_generator", type=int, help="topologies per generator")
        g.add_argument("--seed", type=int, help="base seed (unsigned 64-bit)")
        h = p.add_argument_group("generator parameters")
        h.add_argument("--generators", default=None,
                       help="comma-separated kinds or label=kind items (uniform, heavy, growth)")
        h.add_argument("--tail-exponent", type=float, help="Pareto shape for heavy-tailed grid")
        h.add_argument("--grid-divisions", type=int, help="squares per side for heavy-tailed grid")
        h.add_argument("--attach-bias", type=float, help="growth: probability of attaching near a node")
        h.add_argument("--attach-radius", type=float, help="growth: attachment radius (default D/20)")


def _threads(p):
    p.add_argument("--threads", type=int, default=None,
                   help="worker processes (falls back to $TOPOBIAS_THREADS, then 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="topobias", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-q", "--quiet", action="store_true", help="only report errors on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a seeded topology corpus")
    p.add_argument("--config", type=Path, help="experiment or run config JSON")
    p.add_argument("--out", type=Path, required=True)
    _add_experiment_flags(p, gen=True)
    _threads(p)

    p = sub.add_parser("import", help="import external topology files into a corpus directory")
    p.add_argument("files", nargs="+", type=Path)
    p.add_argument("--area", type=float, required=True, help="expected area side D")
    p.add_argument("--label", required=True, help="generator label for these topologies")
    p.add_argument("--headerless", action="store_true", help="files hold bare x,y rows")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("extract", help="extract feature vectors from a corpus directory")
    p.add_argument("--in", dest="in_dir", type=Path, required=True)
    p.add_argument("--config", type=Path, help="experiment config JSON (default: manifest config)")
    p.add_argument("--out", type=Path, default=None, help="features CSV (default <in>/features.csv)")
    _add_experiment_flags(p)
    _threads(p)

    p = sub.add_parser("bias", help="bias index of every generator subset")
    p.add_argument("--features", type=Path, required=True)
    p.add_argument("--subset-size", type=int, action="append", dest="subset_sizes",
                   help="subset size p (repeatable; default: every size)")
    p.add_argument("--out", type=Path, default=Path("bias_report.json"))

    p = sub.add_parser("rank", help="print subsets ranked by bias index as tab-separated rows")
    p.add_argument("--features", type=Path, required=True)
    p.add_argument("--subset-size", type=int, action="append", dest="subset_sizes")

    p = sub.add_parser("classify", help="k-fold Naive Bayes accuracy and confusion matrix")
    p.add_argument("--features", type=Path, required=True)
    p.add_argument("--kind", choices=KINDS, action="append", dest="kinds")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--pair", default=None, help="labelA,labelB for a two-class comparison")
    p.add_argument("--out", type=Path, default=Path(CLASSIFICATION))

    p = sub.add_parser("fss", help="forward sequential feature selection")
    p.add_argument("--features", type=Path, required=True)
    p.add_argument("--kind", choices=KINDS, default="gaussian")
    p.add_argument("--mode", choices=("cv", "fold"), default="cv")
    p.add_argument("--fold", type=int, default=0, help="held-out fold for --mode fold")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--max-features", type=int, default=None)
    p.add_argument("--full-trace", action="store_true", help="keep adding features past the stop point")
    p.add_argument("--out", type=Path, default=Path(FSS))
    _threads(p)

    p = sub.add_parser("report", help="render summary.md from a run directory")
    p.add_argument("--dir", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None, help="output file; '-' for stdout")

    p = sub.add_parser("pipeline", help="run gen, extract, bias, classify, fss and report")
    p.add_argument("--config", type=Path, help="run config JSON")
    p.add_argument("--out", type=Path, default=None, help="run directory")
    p.add_argument("--stages", default=",".join(STAGES), help="comma-separated subset of stages")
    p.add_argument("--resume", action="store_true", help="skip stages whose output exists")
    p.add_argument("--k", dest="folds", type=int, default=None)
    p.add_argument("--full-trace", action="store_true", default=None)
    p.add_argument("--max-features", dest="fss_max_features", type=int, default=None)
    p.add_argument("--fss-mode", choices=("cv", "fold"), default=None)
    _add_experiment_flags(p, gen=True)
    _threads(p)
    return parser


# --- helpers ---------------------------------------------------------------


def _load_config(path: Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    data = json.loads(path.read_text(encoding="utf-8"))
    if "experiment" in data or "generators" in data:
        return RunConfig.from_dict(data)
    return RunConfig(experiment=ExperimentConfig.from_dict(data))


def _config_from_flags(args, base: RunConfig) -> RunConfig:
    keys = ("area_side", "radii", "quadrat_divisions", "quantization_step", "nodes",
            "per_generator", "seed", "folds", "threads", "full_trace", "fss_max_features")
    kw = {k: getattr(args, k, None) for k in keys}
    if getattr(args, "fss_mode", None):
        kw["fss_mode"] = args.fss_mode
    if getattr(args, "out", None) is not None and args.command in ("gen", "pipeline"):
        kw["out_dir"] = str(args.out)
    cfg = with_overrides(base, **kw)
    gen_text = getattr(args, "generators", None)
    gen_params = {k: getattr(args, k, None) for k in
                  ("tail_exponent", "grid_divisions", "attach_bias", "attach_radius")}
    if gen_text or any(v is not None for v in gen_params.values()):
        if gen_text:
            specs = parse_generator_list(gen_text, **gen_params)
        else:
            specs = [GeneratorSpec(s.kind, s.label, {**s.params, **{k: v for k, v in gen_params.items()
                                                                   if v is not None and k in _accepts(s.kind)}})
                     for s in cfg.generators]
        cfg = replace(cfg, generators=specs)
    return cfg


def _accepts(kind: str) -> tuple[str, ...]:
    return {"heavy_tailed_grid": ("grid_divisions", "tail_exponent"),
            "growth": ("attach_bias", "attach_radius")}.get(kind, ())


def _config_near(features: Path) -> RunConfig:
    """Run config for a standalone stage, taken from a manifest beside the features file."""
    mpath = features.parent / MANIFEST
    if mpath.exists():
        manifest = CorpusManifest.read(mpath)
        return RunConfig(experiment=manifest.config, generators=manifest.specs,
                         out_dir=str(features.parent))
    return RunConfig(out_dir=str(features.parent))


# --- subcommands -----------------------------------------------------------


def cmd_gen(args) -> int:
    cfg = _config_from_flags(args, _load_config(args.config))
    path = stage_gen(cfg)
    print(path)
    return 0


def cmd_import(args) -> int:
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    mpath = out / MANIFEST
    if mpath.exists():
        manifest = CorpusManifest.read(mpath)
        if manifest.config.area_side != args.area:
            raise ValueError(f"{mpath} uses D={manifest.config.area_side:g}, not {args.area:g}")
    else:
        # default radii that fit the area; the extract step can override them
        radii = tuple(r for r in ExperimentConfig().radii if r < args.area) or (args.area / 2,)
        manifest = CorpusManifest([], None, ExperimentConfig(area_side=args.area, radii=radii), [])
    if args.label not in manifest.labels:
        manifest.specs.append(GeneratorSpec("uniform", args.label, {}, 0))
    taken = {e.topology_id for e in manifest.entries}
    start = sum(1 for e in manifest.entries if e.generator == args.label)
    for offset, src in enumerate(args.files):
        tid = f"{args.label}-{start + offset:05d}"
        if tid in taken:
            raise ValueError(f"topology id {tid} already present in {mpath}")
        t = import_topology(src, args.area, args.label, headerless=args.headerless, topology_id=tid)
        (out / f"{tid}.csv").write_text(format_topology(t), encoding="ascii", newline="\n")
        manifest.entries.append(ManifestEntry(tid, args.label, None, f"{tid}.csv"))
    per = {lab: sum(e.generator == lab for e in manifest.entries) for lab in manifest.labels}
    manifest.topologies_per_generator = next(iter(per.values())) if len(set(per.values())) == 1 else None
    manifest.validate()
    manifest.write(mpath)
    log.info("imported %d topologies labelled %s", len(args.files), args.label)
    print(mpath)
    return 0


def cmd_extract(args) -> int:
    if args.config is not None:
        base = _load_config(args.config)
    else:
        mpath = args.in_dir / MANIFEST
        base = RunConfig(experiment=CorpusManifest.read(mpath).config) if mpath.exists() else RunConfig()
    cfg = _config_from_flags(args, base)
    cfg = replace(cfg, out_dir=str(args.in_dir))
    print(stage_extract(cfg, args.in_dir, args.out or args.in_dir / FEATURES))
    return 0


def cmd_bias(args) -> int:
    cfg = replace(_config_near(args.features), subset_sizes=args.subset_sizes)
    print(stage_bias(cfg, args.features, args.out))
    return 0


def cmd_rank(args) -> int:
    fm = FeatureMatrix.read(args.features)
    sizes = args.subset_sizes or list(range(1, len(fm.label_set)))
    report = rank_generator_subsets(fm, sizes)
    out = sys.stdout
    out.write("subset_size\trank\tgenerators\tbias_index\n")
    for e in report.entries:
        out.write(f"{len(e.labels)}\t{e.rank}\t{'+'.join(e.labels)}\t{e.index:.6f}\n")
    return 0


def cmd_classify(args) -> int:
    cfg = _config_near(args.features)
    cfg = with_overrides(cfg, folds=args.k, seed=args.seed)
    cfg = replace(cfg, kinds=args.kinds or ["gaussian"], pairwise_kind=None)
    if args.pair:
        pair = tuple(s.strip() for s in args.pair.split(","))
        if len(pair) != 2:
            raise ValueError("--pair expects labelA,labelB")
        fm = FeatureMatrix.read(args.features)
        reports = [confusion_and_pairwise(fm, cfg.experiment.folds, kind, cfg.experiment.seed, pair)
                   for kind in cfg.kinds]
        print(write_json(classification_document(reports, cfg.to_dict(), fm.catalogue.version),
                         args.out, "classification"))
        return 0
    print(stage_classify(cfg, args.features, args.out))
    return 0


def cmd_fss(args) -> int:
    cfg = with_overrides(_config_near(args.features), folds=args.k, seed=args.seed, threads=args.threads)
    cfg = replace(cfg, fss_kind=args.kind, fss_mode=args.mode, fss_fold=args.fold,
                  fss_max_features=args.max_features, full_trace=args.full_trace)
    print(stage_fss(cfg, args.features, args.out))
    return 0


def cmd_report(args) -> int:
    text = emit_summary(**load_reports(args.dir))
    if args.out is not None and str(args.out) == "-":
        sys.stdout.write(text)
    else:
        out = args.out or args.dir / "summary.md"
        out.write_text(text, encoding="utf-8")
        print(out)
    return 0


def cmd_pipeline(args) -> int:
    cfg = _config_from_flags(args, _load_config(args.config))
    stages = [s.strip() for s in args.stages.split(",") if s.strip()]
    bad = sorted(set(stages) - set(STAGES))
    if bad:
        raise ValueError(f"unknown stage(s): {', '.join(bad)}")
    produced = run_pipeline(cfg, stages, resume=args.resume)
    for name in STAGES:
        if name in produced:
            print(f"{name}\t{produced[name]}")
    return 0


COMMANDS = {"gen": cmd_gen, "import": cmd_import, "extract": cmd_extract, "bias": cmd_bias,
            "rank": cmd_rank, "classify": cmd_classify, "fss": cmd_fss, "report": cmd_report,
            "pipeline": cmd_pipeline}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(asctime)s %(name)s %(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except StageError as exc:
        print(f"topobias {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as exc:
        print(f"topobias {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
