"""Topology feature vectors: 7 inter-node + 5 quadrat + 3 per radius.

Layout of a vector for radii ``r_0 .. r_{R-1}``::

    internode.{min,max,range,mode,mode_count,mean,std}
    spatial.{min,max,range,mode,mode_count}
    density.avg@r_0 ..      shared.avg@r_0 ..      clustering.avg@r_0 ..
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import sparse

from .spatial import GridIndex
from .topology import ExperimentConfig, Topology, neighbours, pairwise_distances

log = logging.getLogger(__name__)

CATALOGUE_VERSION = "topobias-features v1"
INTERNODE_STATS = ("min", "max", "range", "mode", "mode_count", "mean", "std")
SPATIAL_STATS = ("min", "max", "range", "mode", "mode_count")
RADIUS_GROUPS = (("density", "density"), ("shared_neighbours", "shared"), ("clustering", "clustering"))


def _fmt_radius(r: float) -> str:
    return str(int(r)) if float(r).is_integer() else repr(float(r))


@dataclass(frozen=True)
class FeatureDescriptor:
    index: int
    group: str
    statistic: str
    radius: float | None = None

    @property
    def name(self) -> str:
        prefix = {"shared_neighbours": "shared"}.get(self.group, self.group)
        if self.radius is None:
            return f"{prefix}.{self.statistic}"
        return f"{prefix}.{self.statistic}@{_fmt_radius(self.radius)}"


@dataclass(frozen=True)
class FeatureCatalogue:
    descriptors: tuple[FeatureDescriptor, ...]
    version: str = CATALOGUE_VERSION

    def __len__(self):
        return len(self.descriptors)

    def __getitem__(self, i) -> FeatureDescriptor:
        return self.descriptors[i]

    def __iter__(self):
        return iter(self.descriptors)

    @property
    def names(self) -> list[str]:
        return [d.name for d in self.descriptors]

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"no feature named {name!r}") from None

    @property
    def radii(self) -> tuple[float, ...]:
        return tuple(d.radius for d in self.descriptors if d.group == "density")


def build_catalogue(config: ExperimentConfig | Sequence[float]) -> FeatureCatalogue:
    radii = config.radii if isinstance(config, ExperimentConfig) else tuple(float(r) for r in config)
    out = []
    for stat in INTERNODE_STATS:
        out.append(FeatureDescriptor(len(out), "internode", stat))
    for stat in SPATIAL_STATS:
        out.append(FeatureDescriptor(len(out), "spatial", stat))
    for group, _ in RADIUS_GROUPS:
        for r in radii:
            out.append(FeatureDescriptor(len(out), group, "avg", float(r)))
    return FeatureCatalogue(tuple(out))


def catalogue_from_names(names: Sequence[str]) -> FeatureCatalogue:
    """Rebuild a catalogue from its column names, rejecting non-canonical layouts."""
    radii = []
    for name in names:
        if name.startswith("density.avg@"):
            radii.append(float(name.split("@", 1)[1]))
    cat = build_catalogue(radii)
    if cat.names != list(names):
        raise ValueError("feature columns do not follow the canonical catalogue layout")
    return cat


# --- per-group features ----------------------------------------------------


def internode_distance_features(t: Topology, quantization_step: float = 1.0) -> np.ndarray:
    if not quantization_step > 0:
        raise ValueError("quantization_step must be positive")
    d = pairwise_distances(t)
    lo, hi = d.min(), d.max()
    q = np.floor(d / quantization_step + 0.5)
    values, counts = np.unique(q, return_counts=True)
    top = int(np.argmax(counts))  # first maximum, i.e. the smallest tied value
    std = float(np.std(d, ddof=1)) if len(d) > 1 else 0.0
    return np.array([lo, hi, hi - lo, values[top] * quantization_step, counts[top], d.mean(), std])


def quadrat_counts(t: Topology, d: int) -> np.ndarray:
    """Node count per cell of a ``d`` x ``d`` partition, flattened row-major by x cell."""
    if d < 1:
        raise ValueError("quadrat divisions must be >= 1")
    side = t.area_side / d
    cells = np.floor(t.coords / side).astype(np.int64)
    np.clip(cells, 0, d - 1, out=cells)
    return np.bincount(cells[:, 0] * d + cells[:, 1], minlength=d * d)


def spatial_distribution_features(t: Topology, d: int) -> np.ndarray:
    counts = quadrat_counts(t, d)
    freq = np.bincount(counts)
    mode = int(np.argmax(freq))
    lo, hi = counts.min(), counts.max()
    return np.array([lo, hi, hi - lo, mode, freq[mode]], dtype=np.float64)


def node_density(t: Topology, a: int, r: float) -> int:
    return len(neighbours(t, a, r))


def shared_neighbour_count(t: Topology, a: int, b: int, r: float) -> int:
    if a == b:
        raise ValueError("shared neighbour count needs two distinct nodes")
    return len(neighbours(t, a, r) & neighbours(t, b, r))


def clustering_coefficient(t: Topology, a: int, r: float) -> float:
    """Mutually-neighbouring pairs among ``a``'s neighbours, divided by its density.

    An isolated node scores 0. Coincident neighbours (distance 0) do not
    form a pair.
    """
    nb = sorted(neighbours(t, a, r))
    if not nb:
        return 0.0
    xy = t.coords[nb]
    diff = xy[:, None, :] - xy[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    iu = np.triu_indices(len(nb), k=1)
    pairs = np.count_nonzero((dist[iu] > 0) & (dist[iu] < r))
    return pairs / len(nb)


# dense BLAS beats sparse products below this size; float64 keeps counts exact
_DENSE_LIMIT = 2048


def _sym_csr(ii, jj, n):
    m = sparse.coo_matrix((np.ones(len(ii), dtype=np.int64), (ii, jj)), shape=(n, n)).tocsr()
    return m + m.T


def radius_features(t: Topology, radii: Sequence[float]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Average density, shared-neighbour count and clustering for every radius.

    One grid pass at the largest radius yields all candidate pairs; smaller
    radii filter that list. The shared-neighbour sum uses the identity
    ``sum_{a<b} |N(a) & N(b)| = sum_c C(deg(c), 2)``: each node ``c`` is a
    shared neighbour of exactly the pairs drawn from its own neighbour set.
    """
    n = t.n
    radii = [float(r) for r in radii]
    density = np.zeros(len(radii))
    shared = np.zeros(len(radii))
    clustering = np.zeros(len(radii))
    if n < 1 or not radii:
        return density, shared, clustering
    i, j, dist = GridIndex(t.coords, max(radii)).pairs_within(max(radii))
    n_pairs = n * (n - 1) // 2
    for slot, r in enumerate(radii):
        m = dist < r
        ii, jj = i[m], j[m]
        deg = np.bincount(ii, minlength=n) + np.bincount(jj, minlength=n)
        density[slot] = deg.sum() / n
        if n_pairs:
            shared[slot] = float((deg * (deg - 1) // 2).sum()) / n_pairs
        if len(ii) == 0:
            continue
        pos = dist[m] > 0
        if n <= _DENSE_LIMIT:
            adj = np.zeros((n, n))
            adj[ii, jj] = adj[jj, ii] = 1.0
            strict = adj.copy()
            strict[ii[~pos], jj[~pos]] = strict[jj[~pos], ii[~pos]] = 0.0
            # ordered (b, c) neighbour pairs of each node that are themselves linked
            twice_c = ((adj @ strict) * adj).sum(axis=1)
        else:
            adj = _sym_csr(ii, jj, n)
            strict = adj if pos.all() else _sym_csr(ii[pos], jj[pos], n)
            twice_c = np.asarray((adj @ strict).multiply(adj).sum(axis=1)).ravel()
        with np.errstate(divide="ignore", invalid="ignore"):
            cc = np.where(deg > 0, (twice_c / 2) / deg, 0.0)
        clustering[slot] = cc.sum() / n
    return density, shared, clustering


def density_features(t: Topology, radii: Sequence[float]) -> np.ndarray:
    return radius_features(t, radii)[0]


def shared_neighbour_features(t: Topology, radii: Sequence[float]) -> np.ndarray:
    if t.n < 2:
        raise ValueError("shared neighbour features need at least 2 nodes")
    return radius_features(t, radii)[1]


def clustering_features(t: Topology, radii: Sequence[float]) -> np.ndarray:
    return radius_features(t, radii)[2]


def extract_features(t: Topology, config: ExperimentConfig) -> np.ndarray:
    """Full feature vector of length ``12 + 3 * len(config.radii)``."""
    density, shared, clustering = radius_features(t, config.radii)
    vec = np.concatenate([
        internode_distance_features(t, config.quantization_step),
        spatial_distribution_features(t, config.quadrat_divisions),
        density,
        shared,
        clustering,
    ])
    if not np.all(np.isfinite(vec)):
        raise ValueError(f"non-finite feature value for topology {t.id!r}")
    return vec


# --- feature matrix --------------------------------------------------------


@dataclass
class FeatureMatrix:
    ids: list[str]
    labels: list[str]
    values: np.ndarray
    catalogue: FeatureCatalogue

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(len(self.ids), len(self.catalogue))
        if len(self.labels) != len(self.ids):
            raise ValueError("ids and labels differ in length")

    def __len__(self):
        return len(self.ids)

    @property
    def label_set(self) -> list[str]:
        return sorted(set(self.labels))

    def rows_for(self, labels) -> np.ndarray:
        wanted = set(labels)
        return np.array([lab in wanted for lab in self.labels])

    def subset(self, mask) -> "FeatureMatrix":
        mask = np.asarray(mask)
        idx = np.flatnonzero(mask) if mask.dtype == bool else mask
        return FeatureMatrix([self.ids[k] for k in idx], [self.labels[k] for k in idx],
                             self.values[idx], self.catalogue)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["topology_id", "generator", *self.catalogue.names])
        for tid, lab, row in zip(self.ids, self.labels, self.values):
            w.writerow([tid, lab, *(repr(float(v)) for v in row)])
        return buf.getvalue()

    def write(self, path: str | Path):
        Path(path).write_text(self.to_csv(), encoding="utf-8", newline="\n")

    @classmethod
    def read(cls, path: str | Path) -> "FeatureMatrix":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"missing prerequisite {path} (run `extract` first)")
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header or header[:2] != ["topology_id", "generator"]:
                raise ValueError(f"{path}: header must start with 'topology_id,generator'")
            cat = catalogue_from_names(header[2:])
            ids, labels, rows = [], [], []
            for lineno, rec in enumerate(reader, start=2):
                if len(rec) != len(header):
                    raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
                try:
                    vals = [float(v) for v in rec[2:]]
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: {exc}") from None
                if not all(math.isfinite(v) for v in vals):
                    raise ValueError(f"{path}:{lineno}: non-finite feature value")
                ids.append(rec[0])
                labels.append(rec[1])
                rows.append(vals)
        return cls(ids, labels, np.array(rows).reshape(len(rows), len(cat)), cat)


def extract_matrix(topologies: Sequence[Topology], config: ExperimentConfig,
                   workers: int = 1) -> FeatureMatrix:
    """Extract every topology's vector; rows keep the input order."""
    fn = partial(extract_features, config=config)
    if workers > 1 and len(topologies) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(fn, topologies, chunksize=max(1, len(topologies) // (4 * workers))))
    else:
        rows = [fn(t) for t in topologies]
    log.info("extracted %d feature vectors", len(rows))
    cat = build_catalogue(config)
    values = np.vstack(rows) if rows else np.empty((0, len(cat)))
    return FeatureMatrix([t.id for t in topologies], [t.generator_label for t in topologies], values, cat)
