"""Naive Bayes generator classification, k-fold accuracy and forward feature selection."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .features import FeatureMatrix

log = logging.getLogger(__name__)

KINDS = ("gaussian", "bernoulli", "multinomial")
VAR_SMOOTHING = 1e-9
N_BINS = 16


@dataclass
class NaiveBayesModel:
    """A fitted Naive Bayes classifier over a subset of feature columns.

    ``params`` holds the per-kind state:

    * gaussian: ``mean`` and ``var``, shape (classes, active)
    * bernoulli: ``threshold`` (active,) and ``log_on`` / ``log_off`` (classes, active)
    * multinomial: ``lo``, ``hi`` (active,) and ``log_bin`` (classes, active, bins)
    """

    kind: str
    classes: list[str]
    log_prior: np.ndarray
    active: np.ndarray
    n_features: int
    params: dict = field(default_factory=dict)

    @property
    def prior(self) -> np.ndarray:
        return np.exp(self.log_prior)

    def log_scores(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        Xa = X[:, self.active]
        p = self.params
        if self.kind == "gaussian":
            ll = -0.5 * (np.log(2 * np.pi * p["var"])[None] + (Xa[:, None, :] - p["mean"][None]) ** 2 / p["var"][None])
            ll = ll.sum(axis=2)
        elif self.kind == "bernoulli":
            on = Xa > p["threshold"]
            ll = on.astype(float) @ p["log_on"].T + (~on).astype(float) @ p["log_off"].T
        else:
            bins = _bin(Xa, p["lo"], p["hi"], p["log_bin"].shape[2])
            cols = np.arange(Xa.shape[1])
            ll = p["log_bin"][:, cols[None, :], bins].sum(axis=2).T
        return ll + self.log_prior[None, :]

    def predict_many(self, X) -> list[str]:
        # argmax returns the first maximum; classes are sorted, so ties go to the smaller label
        return [self.classes[i] for i in np.argmax(self.log_scores(X), axis=1)]


def _bin(X, lo, hi, n_bins):
    span = hi - lo
    scaled = np.where(span > 0, (X - lo) / np.where(span > 0, span, 1.0), 0.0)
    return np.clip(np.floor(scaled * n_bins), 0, n_bins - 1).astype(np.int64)


def train_naive_bayes(kind: str, X, y: Sequence[str], active=None) -> NaiveBayesModel:
    """Fit a Naive Bayes model on rows ``X`` with labels ``y``.

    All transform parameters (bernoulli thresholds, multinomial bin ranges,
    gaussian variance floor) come from these training rows only.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown classifier kind {kind!r}; choose from {', '.join(KINDS)}")
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y)
    n_features = X.shape[1]
    active = np.arange(n_features) if active is None else np.asarray(sorted(set(int(a) for a in active)))
    if len(active) == 0:
        raise ValueError("active feature set is empty")
    classes = sorted(set(y.tolist()))
    if len(classes) < 2:
        raise ValueError("training data must contain at least 2 classes")
    counts = np.array([np.count_nonzero(y == c) for c in classes])
    if counts.min() < 2:
        thin = [c for c, n in zip(classes, counts) if n < 2]
        raise ValueError(f"classes with fewer than 2 training rows: {', '.join(thin)}")
    Xa = X[:, active]
    log_prior = np.log(counts / counts.sum())
    members = [Xa[y == c] for c in classes]

    if kind == "gaussian":
        floor = VAR_SMOOTHING * np.var(Xa, axis=0).max()
        if floor <= 0:
            floor = VAR_SMOOTHING
        params = {
            "mean": np.array([m.mean(axis=0) for m in members]),
            "var": np.array([m.var(axis=0) for m in members]) + floor,
        }
    elif kind == "bernoulli":
        thr = np.median(Xa, axis=0)
        on = np.array([(m > thr).sum(axis=0) for m in members], dtype=np.float64)
        p_on = (on + 1.0) / (counts[:, None] + 2.0)
        params = {"threshold": thr, "log_on": np.log(p_on), "log_off": np.log1p(-p_on)}
    else:
        lo, hi = Xa.min(axis=0), Xa.max(axis=0)
        freq = np.zeros((len(classes), Xa.shape[1], N_BINS))
        cols = np.arange(Xa.shape[1])
        for ci, m in enumerate(members):
            b = _bin(m, lo, hi, N_BINS)
            np.add.at(freq[ci], (np.broadcast_to(cols, b.shape), b), 1.0)
        params = {"lo": lo, "hi": hi,
                  "log_bin": np.log((freq + 1.0) / (counts[:, None, None] + N_BINS))}
    return NaiveBayesModel(kind, classes, log_prior, active, n_features, params)


def predict(model: NaiveBayesModel, fv) -> tuple[str, dict[str, float]]:
    scores = model.log_scores(np.asarray(fv, dtype=np.float64).reshape(1, -1))[0]
    best = int(np.argmax(scores))
    return model.classes[best], {c: float(s) for c, s in zip(model.classes, scores)}


# --- cross validation ------------------------------------------------------


def fold_plan(labels: Sequence[str], k: int, seed: int) -> np.ndarray:
    """Stratified fold id per row.

    Each class is shuffled and dealt round-robin; the dealing position carries
    over between classes so overall fold sizes also differ by at most one.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    labels = np.asarray(labels)
    classes = sorted(set(labels.tolist()))
    short = [c for c in classes if np.count_nonzero(labels == c) < k]
    if short:
        raise ValueError(f"classes with fewer than k={k} rows: {', '.join(short)}")
    rng = np.random.default_rng(seed)
    folds = np.empty(len(labels), dtype=np.int64)
    offset = 0
    for c in classes:
        idx = rng.permutation(np.flatnonzero(labels == c))
        folds[idx] = (offset + np.arange(len(idx))) % k
        offset += len(idx)
    return folds


@dataclass
class ClassificationReport:
    kind: str
    k: int
    seed: int
    labels: list[str]
    fold_accuracies: list[float]
    confusion: np.ndarray
    active: list[int] | None = None
    pair: tuple[str, str] | None = None

    @property
    def accuracy(self) -> float:
        return float(np.mean(self.fold_accuracies))

    @property
    def class_accuracy(self) -> dict[str, float]:
        rows = self.confusion.sum(axis=1)
        return {lab: float(self.confusion[i, i] / rows[i]) if rows[i] else 0.0
                for i, lab in enumerate(self.labels)}

    @property
    def misclassification_shares(self) -> dict[str, float]:
        """Fraction of all errors whose true class is each label."""
        errors = self.confusion.sum(axis=1) - np.diag(self.confusion)
        total = errors.sum()
        return {lab: float(errors[i] / total) if total else 0.0 for i, lab in enumerate(self.labels)}

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "k": self.k,
            "seed": self.seed,
            "pair": list(self.pair) if self.pair else None,
            "labels": list(self.labels),
            "fold_accuracies": [float(a) for a in self.fold_accuracies],
            "accuracy": self.accuracy,
            "confusion": self.confusion.astype(int).tolist(),
            "class_accuracy": self.class_accuracy,
            "misclassification_shares": self.misclassification_shares,
        }


def _fold_scores(X, y, folds, k, kind, active, classes, only_fold=None):
    pos = {c: i for i, c in enumerate(classes)}
    confusion = np.zeros((len(classes), len(classes)), dtype=np.int64)
    accs = []
    for f in range(k) if only_fold is None else [only_fold]:
        test = folds == f
        model = train_naive_bayes(kind, X[~test], y[~test], active)
        pred = model.predict_many(X[test])
        truth = y[test]
        for t_, p_ in zip(truth, pred):
            confusion[pos[t_], pos[p_]] += 1
        accs.append(float(np.mean(np.asarray(pred) == truth)))
    return accs, confusion


def kfold_cross_validate(gt: FeatureMatrix, k: int = 10, kind: str = "gaussian", seed: int = 0,
                         active=None) -> ClassificationReport:
    y = np.asarray(gt.labels)
    folds = fold_plan(y, k, seed)
    classes = gt.label_set
    accs, confusion = _fold_scores(gt.values, y, folds, k, kind, active, classes)
    return ClassificationReport(kind, k, seed, classes, accs, confusion,
                                None if active is None else sorted(int(a) for a in active))


def confusion_and_pairwise(gt: FeatureMatrix, k: int = 10, kind: str = "gaussian", seed: int = 0,
                           pair: Sequence[str] | None = None, active=None) -> ClassificationReport:
    """Full confusion analysis, or a two-class run restricted to ``pair``."""
    if pair is None:
        return kfold_cross_validate(gt, k, kind, seed, active)
    a, b = pair
    missing = [lab for lab in (a, b) if lab not in set(gt.labels)]
    if missing:
        raise ValueError(f"unknown label(s): {', '.join(missing)}")
    if a == b:
        raise ValueError("pair must name two different labels")
    rep = kfold_cross_validate(gt.subset(gt.rows_for((a, b))), k, kind, seed, active)
    rep.pair = (a, b)
    return rep


# --- forward sequential selection ------------------------------------------


@dataclass
class FssStep:
    feature: int
    features: tuple[int, ...]
    accuracy: float


@dataclass
class FssTrace:
    steps: list[FssStep]
    stop_reason: str
    best_size: int  # steps[:best_size] are the accepted, strictly improving ones

    @property
    def selected(self) -> tuple[int, ...]:
        return self.steps[self.best_size - 1].features if self.best_size else ()

    @property
    def accuracy(self) -> float:
        return self.steps[self.best_size - 1].accuracy if self.best_size else 0.0


def forward_sequential_selection(gt: FeatureMatrix, kind: str = "gaussian", mode: str = "cv",
                                 k: int = 10, seed: int = 0, fold: int = 0,
                                 max_features: int | None = None, full_trace: bool = False,
                                 workers: int = 1) -> FssTrace:
    """Greedy forward selection starting from no features.

    Each round tries every remaining feature and keeps the most accurate
    (smallest index on ties). Selection stops at the first round without a
    strict improvement; with ``full_trace`` the rounds continue up to
    ``max_features`` so the plateau is visible, but ``best_size`` still marks
    the stopping point.
    """
    if len(gt) == 0:
        raise ValueError("ground truth is empty")
    if mode not in ("cv", "fold"):
        raise ValueError("mode must be 'cv' or 'fold'")
    n_features = gt.values.shape[1]
    if max_features is None:
        max_features = n_features
    if not 1 <= max_features <= n_features:
        raise ValueError(f"max_features must lie in [1, {n_features}]")
    if mode == "fold" and not 0 <= fold < k:
        raise ValueError(f"fold must lie in [0, {k - 1}]")

    X, y = gt.values, np.asarray(gt.labels)
    folds = fold_plan(y, k, seed)
    classes = gt.label_set
    only = fold if mode == "fold" else None

    def score(cols):
        accs, _ = _fold_scores(X, y, folds, k, kind, cols, classes, only)
        return float(np.mean(accs))

    selected: list[int] = []
    steps: list[FssStep] = []
    best_acc, best_size, stop = 0.0, 0, None
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while len(selected) < max_features:
            remaining = [f for f in range(n_features) if f not in selected]
            if not remaining:
                break
            trials = [selected + [f] for f in remaining]
            accs = list(pool.map(score, trials)) if pool else [score(t) for t in trials]
            pick = int(np.argmax(accs))  # first maximum = smallest index
            acc = accs[pick]
            selected.append(remaining[pick])
            steps.append(FssStep(remaining[pick], tuple(selected), acc))
            log.info("fss step %d: +%d -> %.4f", len(selected), remaining[pick], acc)
            if stop is None:
                if acc > best_acc:
                    best_acc, best_size = acc, len(steps)
                else:
                    stop = "no improvement"
                    if not full_trace:
                        steps.pop()
                        break
    finally:
        if pool:
            pool.shutdown()
    if stop is None:
        stop = "max features" if len(selected) >= max_features else "all features used"
    return FssTrace(steps, stop, best_size)
