"""End-to-end stages: gen -> extract -> bias -> classify -> fss -> report.

Each stage reads the previous stage's files from the run directory, so any
stage can be rerun on its own.
"""

from __future__ import annotations

import json
import logging
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from itertools import combinations
from pathlib import Path
from typing import Sequence

from . import __version__
from .bias import BiasReport, rank_generator_subsets
from .classify import KINDS, confusion_and_pairwise, forward_sequential_selection, kfold_cross_validate
from .features import CATALOGUE_VERSION, FeatureMatrix, extract_matrix
from .generators import GeneratorSpec, generate_corpus, load_corpus, parse_generator_list, resolve_workers, write_corpus
from .schemas import read_json, validate, write_json
from .topology import ExperimentConfig

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"
FEATURES = "features.csv"
BIAS = "bias_report.json"
CLASSIFICATION = "classification_report.json"
FSS = "fss.json"
SUMMARY = "summary.md"
STAGES = ("gen", "extract", "bias", "classify", "fss", "report")


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception, path: Path | None = None):
        self.stage = stage
        self.path = path
        where = f" ({path})" if path else ""
        super().__init__(f"stage {stage!r} failed{where}: {cause}")


@dataclass
class RunConfig:
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    generators: list[GeneratorSpec] = field(default_factory=lambda: parse_generator_list("uniform,heavy,growth"))
    out_dir: str = "run"
    threads: int = 1
    subset_sizes: list[int] | None = None  # None: every size 1 .. N^TG - 1
    kinds: list[str] = field(default_factory=lambda: list(KINDS))
    pairwise_kind: str | None = "gaussian"
    fss_kind: str = "gaussian"
    fss_mode: str = "cv"
    fss_fold: int = 0
    fss_max_features: int | None = None
    full_trace: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["experiment"] = self.experiment.to_dict()
        d["generators"] = [g.to_dict() for g in self.generators]
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown run config keys: {sorted(unknown)}")
        if "experiment" in data:
            data["experiment"] = ExperimentConfig.from_dict(data["experiment"])
        if "generators" in data:
            data["generators"] = [GeneratorSpec.from_dict(g) for g in data["generators"]]
        return cls(**data)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def envelope(fmt: str, config: dict, catalogue_version: str = CATALOGUE_VERSION) -> dict:
    return {
        "format": fmt,
        "tool": "topobias",
        "tool_version": __version__,
        "catalogue_version": catalogue_version,
        "config": config,
        "metadata": {"created": datetime.now(timezone.utc).isoformat(timespec="seconds")},
    }


# --- report documents ------------------------------------------------------


def bias_document(report: BiasReport, config: dict) -> dict:
    doc = envelope("topobias-bias-report v1", config, report.catalogue.version)
    doc["features"] = report.catalogue.names
    doc["entries"] = [e.to_dict(report.catalogue) for e in report.entries]
    return doc


def classification_document(reports, config: dict, catalogue_version: str = CATALOGUE_VERSION) -> dict:
    doc = envelope("topobias-classification-report v1", config, catalogue_version)
    doc["results"] = [r.to_dict() for r in reports]
    return doc


def fss_document(trace, fm: FeatureMatrix, config: dict, *, kind, mode, k, seed, fold,
                 max_features, full_trace) -> dict:
    doc = envelope("topobias-fss v1", config, fm.catalogue.version)
    doc.update({
        "kind": kind, "mode": mode, "k": k, "seed": seed,
        "fold": fold if mode == "fold" else None,
        "max_features": max_features, "full_trace": full_trace,
        "stop_reason": trace.stop_reason, "best_size": trace.best_size,
        "steps": [{"feature": s.feature, "name": fm.catalogue.names[s.feature],
                   "features": list(s.features), "accuracy": s.accuracy} for s in trace.steps],
    })
    return doc


# --- stages ----------------------------------------------------------------


@contextmanager
def _stage(name: str, path: Path | None = None):
    log.info("stage %s: start", name)
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc, path) from exc
    log.info("stage %s: done", name)


def stage_gen(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    with _stage("gen", out):
        exp = cfg.experiment
        tops, manifest = generate_corpus(cfg.generators, exp.per_generator, exp.seed, exp,
                                         workers=resolve_workers(cfg.threads))
        return write_corpus(tops, manifest, out)


def stage_extract(cfg: RunConfig, in_dir: Path | None = None, out: Path | None = None) -> Path:
    in_dir = Path(in_dir or cfg.out_dir)
    out = Path(out or Path(cfg.out_dir) / FEATURES)
    with _stage("extract", in_dir / MANIFEST):
        tops, _ = load_corpus(in_dir)
        fm = extract_matrix(tops, cfg.experiment, workers=resolve_workers(cfg.threads))
        out.parent.mkdir(parents=True, exist_ok=True)
        fm.write(out)
        return out


def _features(path: Path) -> FeatureMatrix:
    if not path.exists():
        raise FileNotFoundError(f"missing prerequisite {path} (run `extract` first)")
    return FeatureMatrix.read(path)


def stage_bias(cfg: RunConfig, features: Path | None = None, out: Path | None = None) -> Path:
    run = Path(cfg.out_dir)
    features = Path(features or run / FEATURES)
    out = Path(out or run / BIAS)
    with _stage("bias", features):
        fm = _features(features)
        sizes = cfg.subset_sizes or list(range(1, len(fm.label_set)))
        report = rank_generator_subsets(fm, sizes)
        return write_json(bias_document(report, cfg.to_dict()), out, "bias")


def stage_classify(cfg: RunConfig, features: Path | None = None, out: Path | None = None) -> Path:
    run = Path(cfg.out_dir)
    features = Path(features or run / FEATURES)
    out = Path(out or run / CLASSIFICATION)
    with _stage("classify", features):
        fm = _features(features)
        k, seed = cfg.experiment.folds, cfg.experiment.seed
        reports = [kfold_cross_validate(fm, k, kind, seed) for kind in cfg.kinds]
        if cfg.pairwise_kind:
            for pair in combinations(fm.label_set, 2):
                reports.append(confusion_and_pairwise(fm, k, cfg.pairwise_kind, seed, pair))
        return write_json(classification_document(reports, cfg.to_dict(), fm.catalogue.version), out,
                          "classification")


def stage_fss(cfg: RunConfig, features: Path | None = None, out: Path | None = None) -> Path:
    run = Path(cfg.out_dir)
    features = Path(features or run / FEATURES)
    out = Path(out or run / FSS)
    with _stage("fss", features):
        fm = _features(features)
        k, seed = cfg.experiment.folds, cfg.experiment.seed
        max_f = cfg.fss_max_features or len(fm.catalogue)
        trace = forward_sequential_selection(fm, cfg.fss_kind, cfg.fss_mode, k, seed, cfg.fss_fold,
                                             max_f, cfg.full_trace, workers=resolve_workers(cfg.threads))
        doc = fss_document(trace, fm, cfg.to_dict(), kind=cfg.fss_kind, mode=cfg.fss_mode, k=k,
                           seed=seed, fold=cfg.fss_fold, max_features=max_f, full_trace=cfg.full_trace)
        return write_json(doc, out, "fss")


def load_reports(run_dir: Path) -> dict:
    run_dir = Path(run_dir)
    docs = {}
    for key, name in (("bias", BIAS), ("classification", CLASSIFICATION), ("fss", FSS)):
        path = run_dir / name
        docs[key] = read_json(path, key) if path.exists() else None
    return docs


def stage_report(cfg: RunConfig, run_dir: Path | None = None, out: Path | None = None) -> Path:
    run_dir = Path(run_dir or cfg.out_dir)
    out = Path(out or run_dir / SUMMARY)
    with _stage("report", run_dir):
        docs = load_reports(run_dir)
        out.write_text(emit_summary(**docs), encoding="utf-8")
        return out


_STAGE_FUNCS = {"gen": stage_gen, "extract": stage_extract, "bias": stage_bias,
                "classify": stage_classify, "fss": stage_fss, "report": stage_report}
_STAGE_OUTPUT = {"gen": MANIFEST, "extract": FEATURES, "bias": BIAS,
                 "classify": CLASSIFICATION, "fss": FSS, "report": SUMMARY}


def run_pipeline(cfg: RunConfig, stages: Sequence[str] = STAGES, resume: bool = False) -> dict[str, Path]:
    """Run ``stages`` in order; with ``resume`` skip stages whose output already exists."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "run_config.json").write_text(cfg.dumps(), encoding="utf-8")
    produced = {}
    for name in STAGES:
        if name not in stages:
            continue
        target = out / _STAGE_OUTPUT[name]
        if resume and target.exists():
            log.info("stage %s: %s exists, skipping", name, target)
            produced[name] = target
            continue
        produced[name] = _STAGE_FUNCS[name](cfg)
    return produced


# --- summary ---------------------------------------------------------------


def _table(header: Sequence[str], rows: Sequence[Sequence[str]], align: Sequence[str]) -> list[str]:
    marks = {"l": ":---", "r": "---:", "c": ":---:"}
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join(marks[a] for a in align) + "|"]
    lines += ["| " + " | ".join(r) + " |" for r in rows]
    return lines


def emit_summary(bias: dict | None = None, classification: dict | None = None,
                 fss: dict | None = None) -> str:
    """Markdown summary; every present report becomes one table (four in total)."""
    for doc, which in ((bias, "bias"), (classification, "classification"), (fss, "fss")):
        if doc is not None:
            validate(doc, which)

    lines = ["# Topology generator bias summary", ""]

    lines += ["## Bias index", ""]
    if bias is None:
        lines += ["Bias analysis not run.", ""]
    else:
        entries = sorted(bias["entries"], key=lambda e: (e["subset_size"], e["rank"]))
        rows = [[" + ".join(e["labels"]), f"{e['bias_index']:.3f}"] for e in entries]
        lines += _table(["Topology generator(s)", "Bias index"], rows, "lr") + [""]
        best = [e for e in entries if e["rank"] == 1]
        lines += [f"- best with {e['subset_size']} generator(s): {' + '.join(e['labels'])}" for e in best]
        lines += [""]

    lines += ["## Classification accuracy", ""]
    full = []
    if classification is None:
        lines += ["Classification not run.", ""]
    else:
        results = classification["results"]
        rows = []
        for r in results:
            scope = " vs ".join(r["pair"]) if r["pair"] else "all generators"
            rows.append([r["kind"], scope, str(r["k"]), f"{r['accuracy']:.3f}"])
        lines += _table(["Algorithm", "Classes", "k", "Accuracy"], rows, "llrr") + [""]
        full = [r for r in results if not r["pair"]]

    lines += ["## Forward sequential selection", ""]
    if fss is None or not fss["steps"]:
        lines += ["Feature selection not run.", ""]
    else:
        rows = []
        for n, s in enumerate(fss["steps"], start=1):
            acc = f"{s['accuracy']:.3f}"
            if n == fss["best_size"]:
                acc = f"**{acc}**"
            rows.append([str(n), acc, ",".join(str(f) for f in s["features"]), s["name"]])
        lines += _table(["Features", "Accuracy", "Feature IDs", "Added feature"], rows, "crll") + [""]
        best = fss["steps"][fss["best_size"] - 1] if fss["best_size"] else None
        lines += [f"Selection ({fss['kind']}, {fss['mode']}) stopped: {fss['stop_reason']}."]
        if best:
            names = {s["feature"]: s["name"] for s in fss["steps"]}
            lines += ["Best feature set:"] + [f"- {f}: {names[f]}" for f in best["features"]]
        lines += [""]

    lines += ["## Confusion matrix", ""]
    if not full:
        lines += ["Confusion analysis not run.", ""]
    else:
        r = next((x for x in full if x["kind"] == "gaussian"), full[0])
        labels = r["labels"]
        shares = r.get("misclassification_shares", {})
        rows = []
        for lab, row in zip(labels, r["confusion"]):
            rows.append([lab, *(str(v) for v in row), f"{shares.get(lab, 0.0):.3f}"])
        lines += [f"{r['kind']}, k={r['k']}; rows are true generators, columns predictions.", ""]
        lines += _table(["true \\ predicted", *labels, "share of errors"], rows, "l" + "r" * (len(labels) + 1))
        lines += [""]
    return "\n".join(lines)


def with_overrides(cfg: RunConfig, **kw) -> RunConfig:
    exp_fields = set(ExperimentConfig.__dataclass_fields__)
    exp_kw = {k: v for k, v in kw.items() if k in exp_fields and v is not None}
    run_kw = {k: v for k, v in kw.items() if k not in exp_fields and v is not None}
    if exp_kw:
        cfg = replace(cfg, experiment=replace(cfg.experiment, **exp_kw))
    return replace(cfg, **run_kw) if run_kw else cfg
