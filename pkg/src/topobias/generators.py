"""Seeded node-placement generators and corpus assembly.

Three placement models are provided:

* ``uniform`` -- every coordinate drawn independently from U[0, D].
* ``heavy_tailed_grid`` -- the plane is cut into equal squares, each square gets
  a Pareto weight, nodes pick squares in proportion to weight and land
  uniformly inside the chosen square.
* ``growth`` -- nodes arrive one at a time and preferentially settle near
  already well-connected nodes.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .topology import (
    ExperimentConfig,
    Topology,
    check_label,
    format_topology,
    read_topology,
    validate_topology,
)

log = logging.getLogger(__name__)

KINDS = ("uniform", "heavy_tailed_grid", "growth")
KIND_ALIASES = {"uniform": "uniform", "heavy": "heavy_tailed_grid",
                "heavy_tailed_grid": "heavy_tailed_grid", "growth": "growth"}

DEFAULT_TAIL_EXPONENT = 1.2
DEFAULT_GRID_DIVISIONS = 10
DEFAULT_ATTACH_BIAS = 0.25

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One SplitMix64 step (Steele, Lea & Flood 2014) used as a 64-bit mixer."""
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def topology_seed(base_seed: int, generator_index: int, topology_index: int) -> int:
    h = splitmix64(base_seed & _MASK64)
    h = splitmix64(h ^ (generator_index & _MASK64))
    return splitmix64(h ^ (topology_index & _MASK64))


def _check_common(n: int, D: float):
    if n < 1:
        raise ValueError(f"node count must be >= 1, got {n}")
    if not D > 0:
        raise ValueError(f"area side must be positive, got {D}")


def generate_uniform(n: int, D: float, seed: int, *, label: str = "uniform",
                     topology_id: str | None = None) -> Topology:
    _check_common(n, D)
    rng = np.random.default_rng(seed)
    coords = rng.uniform(0.0, D, size=(n, 2))
    return Topology(topology_id or f"{label}-s{seed}", label, D, coords, seed)


def generate_heavy_tailed(n: int, D: float, grid_divisions: int = DEFAULT_GRID_DIVISIONS,
                          tail_exponent: float = DEFAULT_TAIL_EXPONENT, seed: int = 0, *,
                          label: str = "heavy_tailed_grid",
                          topology_id: str | None = None) -> Topology:
    _check_common(n, D)
    if grid_divisions < 1:
        raise ValueError(f"grid_divisions must be >= 1, got {grid_divisions}")
    if not tail_exponent > 0:
        raise ValueError(f"tail_exponent must be positive, got {tail_exponent}")
    rng = np.random.default_rng(seed)
    cells = grid_divisions * grid_divisions
    # numpy's pareto is Lomax; +1 gives the classical Pareto with scale 1
    weights = rng.pareto(tail_exponent, size=cells) + 1.0
    chosen = rng.choice(cells, size=n, p=weights / weights.sum())
    side = D / grid_divisions
    origin = np.column_stack((chosen // grid_divisions, chosen % grid_divisions)) * side
    coords = origin + rng.uniform(0.0, side, size=(n, 2))
    np.clip(coords, 0.0, D, out=coords)
    return Topology(topology_id or f"{label}-s{seed}", label, D, coords, seed)


def generate_growth(n: int, D: float, attach_bias: float = DEFAULT_ATTACH_BIAS,
                    attach_radius: float | None = None, seed: int = 0, *,
                    label: str = "growth", topology_id: str | None = None) -> Topology:
    """Grow a placement one node at a time.

    With probability ``attach_bias`` a newcomer picks an existing anchor with
    probability proportional to ``1 + degree`` (degree counted at
    ``attach_radius``) and lands uniformly in the disc around it, clamped to
    the area. Otherwise it lands uniformly anywhere, which lets isolated
    nodes seed new clusters later on.
    """
    _check_common(n, D)
    if attach_radius is None:
        attach_radius = D / 20.0
    if not 0.0 <= attach_bias <= 1.0:
        raise ValueError(f"attach_bias must lie in [0, 1], got {attach_bias}")
    if not 0.0 < attach_radius < D:
        raise ValueError(f"attach_radius must lie in (0, D), got {attach_radius}")
    rng = np.random.default_rng(seed)
    coords = np.empty((n, 2))
    degree = np.zeros(n)
    coords[0] = rng.uniform(0.0, D, size=2)
    for k in range(1, n):
        if rng.random() < attach_bias:
            w = 1.0 + degree[:k]
            anchor = rng.choice(k, p=w / w.sum())
            rho = attach_radius * np.sqrt(rng.random())
            theta = rng.uniform(0.0, 2.0 * np.pi)
            p = coords[anchor] + rho * np.array([np.cos(theta), np.sin(theta)])
            coords[k] = np.clip(p, 0.0, D)
        else:
            coords[k] = rng.uniform(0.0, D, size=2)
        diff = coords[:k] - coords[k]
        near = np.hypot(diff[:, 0], diff[:, 1]) < attach_radius
        degree[:k] += near
        degree[k] = near.sum()
    return Topology(topology_id or f"{label}-s{seed}", label, D, coords, seed)


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    label: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        kind = KIND_ALIASES.get(self.kind)
        if kind is None:
            raise ValueError(f"unknown generator kind {self.kind!r}; choose from {', '.join(KINDS)}")
        object.__setattr__(self, "kind", kind)
        check_label(self.label)
        allowed = {
            "uniform": set(),
            "heavy_tailed_grid": {"grid_divisions", "tail_exponent"},
            "growth": {"attach_bias", "attach_radius"},
        }[kind]
        extra = set(self.params) - allowed
        if extra:
            raise ValueError(f"generator {self.label!r} ({kind}) does not accept {sorted(extra)}")
        defaults = {"heavy_tailed_grid": {"grid_divisions": DEFAULT_GRID_DIVISIONS,
                                          "tail_exponent": DEFAULT_TAIL_EXPONENT},
                    "growth": {"attach_bias": DEFAULT_ATTACH_BIAS}}.get(kind, {})
        object.__setattr__(self, "params", {**defaults, **self.params})

    def generate(self, n: int, D: float, seed: int, topology_id: str | None = None) -> Topology:
        if self.kind == "uniform":
            return generate_uniform(n, D, seed, label=self.label, topology_id=topology_id)
        if self.kind == "heavy_tailed_grid":
            return generate_heavy_tailed(n, D, seed=seed, label=self.label,
                                         topology_id=topology_id, **self.params)
        return generate_growth(n, D, seed=seed, label=self.label,
                               topology_id=topology_id, **self.params)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "label": self.label, "params": dict(self.params), "seed": self.seed}

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratorSpec":
        return cls(data["kind"], data["label"], dict(data.get("params", {})), int(data.get("seed", 0)))


def parse_generator_list(text: str, **params) -> list[GeneratorSpec]:
    """Parse ``uniform,heavy,growth`` or ``label=kind`` items.

    Keyword ``params`` are routed to whichever kinds accept them; ``None``
    values are dropped so CLI defaults fall through.
    """
    specs = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        label, sep, kind = item.partition("=")
        if not sep:
            kind = label
        kind = KIND_ALIASES.get(kind, kind)
        accepted = {"heavy_tailed_grid": ("grid_divisions", "tail_exponent"),
                    "growth": ("attach_bias", "attach_radius")}.get(kind, ())
        own = {k: v for k, v in params.items() if k in accepted and v is not None}
        specs.append(GeneratorSpec(kind, label, own))
    if not specs:
        raise ValueError("no generators given")
    return specs


@dataclass(frozen=True)
class ManifestEntry:
    topology_id: str
    generator: str
    seed: int | None
    file: str

    def to_dict(self) -> dict:
        return {"id": self.topology_id, "generator": self.generator, "seed": self.seed, "file": self.file}


@dataclass
class CorpusManifest:
    specs: list[GeneratorSpec]
    topologies_per_generator: int | None  # None for imported corpora with uneven counts
    config: ExperimentConfig
    entries: list[ManifestEntry]

    def validate(self):
        expected = len(self.specs) * (self.topologies_per_generator or 0)
        if self.topologies_per_generator is not None and len(self.entries) != expected:
            raise ValueError(f"manifest has {len(self.entries)} entries, expected {expected}")
        seeds = [e.seed for e in self.entries if e.seed is not None]
        if len(set(seeds)) != len(seeds):
            raise ValueError("per-topology seeds are not pairwise distinct")
        ids = [e.topology_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate topology ids in manifest")

    @property
    def labels(self) -> list[str]:
        return [s.label for s in self.specs]

    def to_dict(self) -> dict:
        from . import __version__
        return {
            "format": "topobias-manifest v1",
            "tool_version": __version__,
            "config": self.config.to_dict(),
            "generators": [s.to_dict() for s in self.specs],
            "topologies_per_generator": self.topologies_per_generator,
            "topologies": [e.to_dict() for e in self.entries],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CorpusManifest":
        return cls(
            specs=[GeneratorSpec.from_dict(s) for s in data["generators"]],
            topologies_per_generator=data["topologies_per_generator"],
            config=ExperimentConfig.from_dict(data["config"]),
            entries=[ManifestEntry(e["id"], e["generator"], e["seed"], e["file"]) for e in data["topologies"]],
        )

    def write(self, path: str | Path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def read(cls, path: str | Path) -> "CorpusManifest":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _generate_one(task):
    spec, n, D, seed, tid = task
    return spec.generate(n, D, seed, topology_id=tid)


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get("TOPOBIAS_THREADS", "1") or 1)
    return max(1, workers)


def generate_corpus(specs: Sequence[GeneratorSpec], per_generator: int, base_seed: int,
                    config: ExperimentConfig | None = None, *,
                    workers: int | None = 1) -> tuple[list[Topology], CorpusManifest]:
    """Generate ``len(specs) * per_generator`` topologies in manifest order."""
    if not specs:
        raise ValueError("at least one generator spec is required")
    if per_generator < 1:
        raise ValueError("per_generator must be >= 1")
    labels = [s.label for s in specs]
    dupes = sorted({lab for lab in labels if labels.count(lab) > 1})
    if dupes:
        raise ValueError(f"duplicate generator labels: {', '.join(dupes)}")
    if config is None:
        config = ExperimentConfig(per_generator=per_generator, seed=base_seed)
    specs = [GeneratorSpec(s.kind, s.label, dict(s.params), base_seed) for s in specs]

    tasks, entries = [], []
    for gi, spec in enumerate(specs):
        for ti in range(per_generator):
            seed = topology_seed(base_seed, gi, ti)
            tid = f"{spec.label}-{ti:05d}"
            tasks.append((spec, config.nodes, config.area_side, seed, tid))
            entries.append(ManifestEntry(tid, spec.label, seed, f"{tid}.csv"))

    workers = resolve_workers(workers)
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            topologies = list(pool.map(_generate_one, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        topologies = [_generate_one(t) for t in tasks]

    manifest = CorpusManifest(list(specs), per_generator, config, entries)
    manifest.validate()
    return topologies, manifest


def write_corpus(topologies: Sequence[Topology], manifest: CorpusManifest, out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for t, entry in zip(topologies, manifest.entries):
        (out_dir / entry.file).write_text(format_topology(t), encoding="ascii", newline="\n")
    manifest.write(out_dir / "manifest.json")
    log.info("wrote %d topologies to %s", len(topologies), out_dir)
    return out_dir / "manifest.json"


def import_topology(path: str | Path, expected_D: float, label: str, *,
                    headerless: bool = False, topology_id: str | None = None) -> Topology:
    """Read an externally generated placement and check it against ``expected_D``."""
    check_label(label)
    t = read_topology(path, expected_D=expected_D, label=label, headerless=headerless,
                      topology_id=topology_id)
    report = validate_topology(t)
    if not report.ok:
        raise ValueError(f"{path}: " + "; ".join(report.violations))
    return t


def load_corpus(in_dir: str | Path) -> tuple[list[Topology], CorpusManifest]:
    in_dir = Path(in_dir)
    mpath = in_dir / "manifest.json"
    if not mpath.exists():
        raise FileNotFoundError(f"missing prerequisite {mpath} (run `gen` or `import` first)")
    manifest = CorpusManifest.read(mpath)
    D = manifest.config.area_side
    topologies = []
    for e in manifest.entries:
        t = read_topology(in_dir / e.file, expected_D=D, topology_id=e.topology_id)
        if t.generator_label != e.generator:
            t = Topology(t.id, e.generator, t.area_side, t.coords, t.seed)
        topologies.append(t)
    return topologies, manifest
