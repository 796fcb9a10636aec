"""Planar node placements and the geometric primitives shared by every stage."""

from __future__ import annotations

import math
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

FORMAT_TAG = "topobias-topology v1"
DEFAULT_RADII = (5.0, 10.0, 20.0, 30.0, 40.0, 60.0, 80.0, 100.0)
_LABEL_RE = re.compile(r"^[A-Za-z0-9_.+-]+$")


class Point(NamedTuple):
    x: float
    y: float


class TopologyFormatError(ValueError):
    """A topology file could not be parsed; carries the offending line number."""

    def __init__(self, message: str, path: str | Path | None = None, line: int | None = None):
        self.path = None if path is None else str(path)
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
            if line is not None:
                where += f"{line}:"
            where += " "
        super().__init__(where + message)


def check_label(label: str) -> str:
    if not label or not _LABEL_RE.match(label):
        raise ValueError(f"invalid generator label {label!r} (allowed: letters, digits, _ . + -)")
    return label


@dataclass(frozen=True, eq=False)
class Topology:
    """N labelled nodes inside a ``area_side`` x ``area_side`` square.

    Node ``k`` is row ``k`` of ``coords``; the array is read-only.
    """

    id: str
    generator_label: str
    area_side: float
    coords: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        arr = np.array(self.coords, dtype=np.float64).reshape(-1, 2)
        arr.setflags(write=False)
        object.__setattr__(self, "coords", arr)
        object.__setattr__(self, "area_side", float(self.area_side))

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def nodes(self) -> tuple[Point, ...]:
        return tuple(Point(float(x), float(y)) for x, y in self.coords)

    def __len__(self):
        return self.n


@dataclass
class ValidationResult:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


def euclidean_distance(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def pairwise_distances(t: Topology) -> np.ndarray:
    """Distances for every pair a < b, in lexicographic (a, b) order."""
    if t.n < 2:
        raise ValueError(f"topology {t.id!r} has {t.n} node(s); pairwise distances need at least 2")
    ia, ib = np.triu_indices(t.n, k=1)
    diff = t.coords[ia] - t.coords[ib]
    return np.hypot(diff[:, 0], diff[:, 1])


def _check_index(t: Topology, a: int):
    if not 0 <= a < t.n:
        raise IndexError(f"node index {a} out of range for topology with {t.n} nodes")


def neighbours(t: Topology, a: int, r: float) -> set[int]:
    """Nodes other than ``a`` strictly closer than ``r``."""
    _check_index(t, a)
    if not r > 0:
        raise ValueError("radius must be positive")
    diff = t.coords - t.coords[a]
    d = np.hypot(diff[:, 0], diff[:, 1])
    hits = np.flatnonzero(d < r)
    return {int(b) for b in hits if b != a}


def validate_topology(t: Topology) -> ValidationResult:
    result = ValidationResult()
    if t.n == 0:
        result.violations.append("no nodes")
    if not (math.isfinite(t.area_side) and t.area_side > 0):
        result.violations.append(f"area side {t.area_side!r} is not a positive finite number")
    for k, (x, y) in enumerate(t.coords):
        if not (math.isfinite(x) and math.isfinite(y)):
            result.violations.append(f"node {k}: non-finite coordinate ({x}, {y})")
        elif not (0.0 <= x <= t.area_side and 0.0 <= y <= t.area_side):
            result.violations.append(
                f"node {k}: coordinate out of bounds ({x}, {y}) for D={t.area_side:g}"
            )
    return result


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters shared by generation, extraction and classification."""

    area_side: float = 1000.0
    nodes: int = 1000
    per_generator: int = 1000
    radii: tuple[float, ...] = DEFAULT_RADII
    quadrat_divisions: int = 10
    folds: int = 10
    seed: int = 0
    quantization_step: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "radii", tuple(float(r) for r in self.radii))
        self.validate()

    def validate(self):
        problems = []
        if not self.area_side > 0:
            problems.append("area_side must be positive")
        if self.nodes < 1:
            problems.append("nodes must be >= 1")
        if self.per_generator < 1:
            problems.append("per_generator must be >= 1")
        if not self.radii:
            problems.append("at least one radius is required")
        prev = 0.0
        for r in self.radii:
            if not prev < r < self.area_side:
                problems.append(f"radii must be strictly increasing in (0, D); got {list(self.radii)}")
                break
            prev = r
        if self.quadrat_divisions < 1:
            problems.append("quadrat_divisions must be >= 1")
        if self.folds < 2:
            problems.append("folds must be >= 2")
        if not 0 <= self.seed < 2**64:
            problems.append("seed must be an unsigned 64-bit integer")
        if not self.quantization_step > 0:
            problems.append("quantization_step must be positive")
        if problems:
            raise ValueError("invalid experiment config: " + "; ".join(problems))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["radii"] = list(self.radii)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown experiment config keys: {sorted(unknown)}")
        return cls(**data)


# --- topology CSV v1 -------------------------------------------------------


def format_topology(t: Topology) -> str:
    seed = "none" if t.seed is None else str(t.seed)
    lines = [f"# {FORMAT_TAG},D={t.area_side!r},generator={t.generator_label},seed={seed}", "id,x,y"]
    lines.extend(f"{k},{x:.6f},{y:.6f}" for k, (x, y) in enumerate(t.coords))
    return "\n".join(lines) + "\n"


def write_topology(t: Topology, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(format_topology(t), encoding="ascii", newline="\n")
    return path


def _parse_float(text: str, path, lineno: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise TopologyFormatError(f"not a number: {text.strip()!r}", path, lineno) from None
    if not math.isfinite(value):
        raise TopologyFormatError(f"non-finite coordinate {text.strip()!r}", path, lineno)
    return value


def _parse_header(line: str, path) -> dict[str, str]:
    body = line.lstrip("#").strip()
    parts = [p.strip() for p in body.split(",")]
    if parts[0] != FORMAT_TAG:
        raise TopologyFormatError(f"expected format tag {FORMAT_TAG!r}", path, 1)
    meta = {}
    for part in parts[1:]:
        key, sep, value = part.partition("=")
        if not sep:
            raise TopologyFormatError(f"malformed header field {part!r}", path, 1)
        meta[key] = value
    for key in ("D", "generator", "seed"):
        if key not in meta:
            raise TopologyFormatError(f"header lacks {key}=", path, 1)
    return meta


def parse_topology(
    lines: Iterable[str],
    *,
    path: str | Path | None = None,
    expected_D: float | None = None,
    label: str | None = None,
    headerless: bool = False,
    topology_id: str | None = None,
) -> Topology:
    """Parse topology CSV v1 text (or bare ``x,y`` rows when ``headerless``)."""
    rows: list[tuple[float, float]] = []
    meta: dict[str, str] = {}
    bound_lines: list[int] = []
    expect_id = 0
    seen_header = headerless
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if lineno == 1 and not headerless:
            if not line.startswith("#"):
                raise TopologyFormatError("missing '# topobias-topology v1' header line", path, 1)
            meta = _parse_header(line, path)
            continue
        if not seen_header:
            if [c.strip() for c in line.split(",")] != ["id", "x", "y"]:
                raise TopologyFormatError("expected column header 'id,x,y'", path, lineno)
            seen_header = True
            continue
        cells = line.split(",")
        if headerless:
            if len(cells) != 2:
                raise TopologyFormatError(f"expected 2 fields 'x,y', got {len(cells)}", path, lineno)
            x, y = (_parse_float(c, path, lineno) for c in cells)
        else:
            if len(cells) != 3:
                raise TopologyFormatError(f"expected 3 fields 'id,x,y', got {len(cells)}", path, lineno)
            try:
                node_id = int(cells[0])
            except ValueError:
                raise TopologyFormatError(f"node id {cells[0]!r} is not an integer", path, lineno) from None
            if node_id != expect_id:
                raise TopologyFormatError(f"node id {node_id} out of order (expected {expect_id})", path, lineno)
            expect_id += 1
            x, y = (_parse_float(c, path, lineno) for c in cells[1:])
        rows.append((x, y))
        bound_lines.append(lineno)
    if not rows:
        raise TopologyFormatError("empty file: no node rows", path, None)

    D = expected_D
    if not headerless:
        file_D = _parse_float(meta["D"], path, 1)
        if D is None:
            D = file_D
        elif not math.isclose(D, file_D, rel_tol=1e-12):
            raise TopologyFormatError(f"file declares D={file_D:g} but D={D:g} was expected", path, 1)
    if D is None:
        raise ValueError("expected_D is required for headerless input")
    for (x, y), lineno in zip(rows, bound_lines):
        if not (0.0 <= x <= D and 0.0 <= y <= D):
            raise TopologyFormatError(f"coordinate ({x}, {y}) out of bounds [0, {D:g}]", path, lineno)

    seed = None
    if meta.get("seed", "none") != "none":
        try:
            seed = int(meta["seed"])
        except ValueError:
            raise TopologyFormatError(f"bad seed {meta['seed']!r}", path, 1) from None
    gen_label = label if label is not None else meta.get("generator", "")
    if topology_id is None:
        topology_id = Path(path).stem if path is not None else "topology"
    return Topology(topology_id, gen_label, D, np.array(rows), seed)


def read_topology(path: str | Path, **kwargs) -> Topology:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        return parse_topology(fh, path=path, **kwargs)
