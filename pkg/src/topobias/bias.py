"""Hedges' g per feature, the combined bias index, and generator-subset ranking."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .features import FeatureCatalogue, FeatureMatrix


class DegenerateFeatureError(ValueError):
    """Both populations are constant on a feature but their means differ."""


def _as_values(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64).ravel()


def pooled_std(sub, all_) -> float:
    sub, all_ = _as_values(sub), _as_values(all_)
    if len(sub) < 2 or len(all_) < 2:
        raise ValueError("pooled standard deviation needs at least 2 values in each population")
    if np.ptp(sub) == 0 and np.ptp(all_) == 0:
        return 0.0  # exact; summation residue would otherwise leave ~1e-16
    num = (len(all_) - 1) * np.var(all_, ddof=1) + (len(sub) - 1) * np.var(sub, ddof=1)
    return float(np.sqrt(num / (len(all_) + len(sub) - 2)))


def hedges_g(sub, all_, feature: str | None = None) -> float:
    """Standardised difference ``(mean(all) - mean(sub)) / pooled_std``.

    No small-sample correction factor is applied.
    """
    sub, all_ = _as_values(sub), _as_values(all_)
    s = pooled_std(sub, all_)
    diff = float(all_.mean() - sub.mean())
    if s == 0.0:
        diff = float(all_[0] - sub[0])
        if diff == 0.0:
            return 0.0
        what = f"feature {feature!r}" if feature else "feature"
        raise DegenerateFeatureError(f"{what} is constant in both populations but the means differ")
    return diff / s


def _g_vector(sub: np.ndarray, all_: np.ndarray, names: Sequence[str]) -> np.ndarray:
    if len(sub) < 2 or len(all_) < 2:
        raise ValueError("bias index needs at least 2 rows in each population")
    n_s, n_a = len(sub), len(all_)
    num = (n_a - 1) * np.var(all_, axis=0, ddof=1) + (n_s - 1) * np.var(sub, axis=0, ddof=1)
    s = np.sqrt(num / (n_a + n_s - 2))
    diff = all_.mean(axis=0) - sub.mean(axis=0)
    # constant columns: rounding in var/mean must not fake a spread or a shift
    flat = (np.ptp(sub, axis=0) == 0) & (np.ptp(all_, axis=0) == 0)
    s[flat] = 0.0
    diff[flat] = all_[0, flat] - sub[0, flat]
    g = np.zeros(sub.shape[1])
    live = s > 0
    g[live] = diff[live] / s[live]
    bad = np.flatnonzero(~live & (diff != 0))
    if len(bad):
        raise DegenerateFeatureError(
            f"feature {names[bad[0]]!r} is constant in both populations but the means differ")
    return g


@dataclass
class Population:
    labels: frozenset
    values: np.ndarray
    catalogue: FeatureCatalogue

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=np.float64))
        if self.values.shape[0] == 0:
            raise ValueError("population is empty")
        if self.values.shape[1] != len(self.catalogue):
            raise ValueError("population width does not match its catalogue")

    @classmethod
    def from_matrix(cls, fm: FeatureMatrix, labels=None) -> "Population":
        if labels is None:
            return cls(frozenset(fm.labels), fm.values, fm.catalogue)
        return cls(frozenset(labels), fm.values[fm.rows_for(labels)], fm.catalogue)


def bias_index(sub: Population, all_: Population) -> tuple[np.ndarray, float]:
    """Per-feature g values and their Euclidean norm."""
    if sub.catalogue.names != all_.catalogue.names:
        raise ValueError("populations use different feature catalogues")
    g = _g_vector(sub.values, all_.values, sub.catalogue.names)
    return g, float(np.sqrt(np.sum(g * g)))


@dataclass
class BiasEntry:
    labels: tuple[str, ...]
    g: np.ndarray
    index: float
    rank: int = 0

    def to_dict(self, catalogue: FeatureCatalogue) -> dict:
        return {
            "labels": list(self.labels),
            "subset_size": len(self.labels),
            "bias_index": self.index,
            "rank": self.rank,
            "g": {name: float(v) for name, v in zip(catalogue.names, self.g)},
        }


@dataclass
class BiasReport:
    entries: list[BiasEntry]
    catalogue: FeatureCatalogue

    def best(self, p: int | None = None) -> BiasEntry:
        pool = [e for e in self.entries if p is None or len(e.labels) == p]
        return min(pool, key=lambda e: e.rank)


def rank_generator_subsets(fm: FeatureMatrix, p: int | Sequence[int]) -> BiasReport:
    """Bias index of every ``p``-subset of generators, ranked ascending.

    ``p`` may be a sequence of sizes; ranks then run within each size.
    Ties go to the lexicographically smaller label tuple.
    """
    labels = fm.label_set
    sizes = [p] if isinstance(p, int) else list(p)
    for size in sizes:
        if not 1 <= size < len(labels):
            raise ValueError(f"subset size {size} out of range [1, {len(labels) - 1}]")
    counts = {lab: fm.labels.count(lab) for lab in labels}
    thin = sorted(lab for lab, c in counts.items() if c < 2)
    if thin:
        raise ValueError(f"generators with fewer than 2 topologies: {', '.join(thin)}")

    everyone = Population.from_matrix(fm)
    entries = []
    for size in sizes:
        group = []
        for combo in combinations(labels, size):
            g, idx = bias_index(Population.from_matrix(fm, combo), everyone)
            group.append(BiasEntry(combo, g, idx))
        group.sort(key=lambda e: (e.index, e.labels))
        for r, e in enumerate(group, start=1):
            e.rank = r
        entries.extend(group)
    return BiasReport(entries, fm.catalogue)
