"""Information-gain feature scoring and threshold selection."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator
from sklearn.feature_selection import SelectorMixin

from .corpus import N_LABELS
from .errors import DataError
from .features.sparse import FeatureSpace, SparseVector, to_csr
from .validation import check_is_fitted, check_label_array

DEFAULT_SWEEP = (0.001, 0.003, 0.005, 0.007, 0.009, 0.01, 0.012, 0.015, 0.02)
PAPER_THRESHOLD = 0.009


@dataclass(frozen=True)
class FeatureScore:
    name: str
    ig: float


def _entropy_rows(counts):
    """Entropy in bits of each row of a count matrix (0 log 0 = 0)."""
    counts = np.asarray(counts, dtype=np.float64)
    totals = counts.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(totals > 0, counts / totals, 0.0)
        terms = np.where(p > 0, p * np.log2(p), 0.0)
    return -terms.sum(axis=1)


def presence_label_counts(X, y, n_labels=N_LABELS) -> np.ndarray:
    """(n_features, n_labels) counts of sentences where the feature is present (> 0)."""
    X = sp.csr_matrix(X)
    present = X.copy()
    present.data = (present.data > 0).astype(np.float64)
    present.eliminate_zeros()
    onehot = sp.csr_matrix((np.ones(y.size), (np.arange(y.size), y)), shape=(y.size, n_labels))
    return np.asarray((present.T @ onehot).todense())


def ig_from_counts(present_counts, label_counts) -> np.ndarray:
    n = label_counts.sum()
    absent_counts = label_counts[None, :] - present_counts
    n_present = present_counts.sum(axis=1)
    h_y = _entropy_rows(label_counts[None, :])[0]
    cond = (n_present * _entropy_rows(present_counts) + (n - n_present) * _entropy_rows(absent_counts)) / n
    return np.clip(h_y - cond, 0.0, None)


def information_gain_matrix(X, y) -> np.ndarray:
    y = check_label_array(y, X.shape[0])
    if X.shape[0] == 0:
        raise DataError("information gain needs at least one sentence")
    counts = presence_label_counts(X, y)
    label_counts = np.bincount(y, minlength=N_LABELS).astype(np.float64)
    return ig_from_counts(counts, label_counts)


def information_gain(vectors: Sequence[SparseVector], labels, space: FeatureSpace) -> list[FeatureScore]:
    if len(vectors) == 0:
        raise DataError("information gain needs at least one sentence")
    if len(vectors) != len(labels):
        raise DataError(f"{len(vectors)} vectors for {len(labels)} labels")
    ig = information_gain_matrix(to_csr(vectors, len(space)), labels)
    return [FeatureScore(name, float(v)) for name, v in zip(space.names, ig)]


@dataclass(frozen=True)
class Projection:
    """Maps original dimensions to the reduced space (-1 = dropped)."""

    mapping: np.ndarray
    kept: np.ndarray

    @property
    def n_out(self):
        return self.kept.size


def select_features(scores: Sequence[FeatureScore], threshold: float) -> tuple[FeatureSpace, Projection]:
    if threshold < 0:
        raise DataError("IG threshold must be non-negative")
    ig = np.array([s.ig for s in scores])
    kept = np.flatnonzero(ig >= threshold)
    mapping = np.full(len(scores), -1, dtype=np.int64)
    mapping[kept] = np.arange(kept.size)
    return FeatureSpace(scores[i].name for i in kept), Projection(mapping, kept)


def project(vector: SparseVector, projection: Projection) -> SparseVector:
    if vector.indices.size and vector.indices[-1] >= projection.mapping.size:
        raise DataError("vector dimension outside the projected space")
    new = projection.mapping[vector.indices]
    keep = new >= 0
    return SparseVector._trusted(new[keep], vector.values[keep])


def write_scores(scores: Sequence[FeatureScore], path) -> None:
    ordered = sorted(scores, key=lambda s: (-s.ig, s.name))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in ordered:
            fh.write(f"{s.name}\t{s.ig:.10g}\n")


class InformationGainSelector(SelectorMixin, BaseEstimator):
    """Keep features whose presence-IG with the section label is >= ``threshold``."""

    def __init__(self, threshold=PAPER_THRESHOLD):
        self.threshold = threshold

    def fit(self, X, y):
        if self.threshold < 0:
            raise DataError("IG threshold must be non-negative")
        self.scores_ = information_gain_matrix(X, y)
        self.n_features_in_ = X.shape[1]
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "scores_")
        return self.scores_ >= self.threshold

    def transform(self, X):
        check_is_fitted(self, "scores_")
        if X.shape[1] != self.n_features_in_:
            raise DataError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return sp.csr_matrix(X)[:, np.flatnonzero(self._get_support_mask())]

    def _more_tags(self):
        return {"allow_nan": False}


def sweep_thresholds(corpus, model_spec, thresholds=DEFAULT_SWEEP, folds=10, seed=0, paper_mode=False,
                     feature_config=None, jobs=1):
    """Run the select/train/evaluate loop per threshold.

    Returns rows ``(threshold, model, label, precision, recall, f1)`` with
    fold-averaged metrics, for every label.
    """
    from .eval import run_experiment

    thresholds = list(thresholds)
    if not thresholds:
        raise DataError("threshold sweep needs at least one threshold")
    rows = []
    for t in thresholds:
        report = run_experiment(corpus, [model_spec], feature_config=feature_config,
                                threshold=t, k=folds, seed=seed, paper_mode=paper_mode, ttests=False, jobs=jobs)
        res = report.results[model_spec.name]
        for lab, (p, r, f) in res.mean_prf().items():
            rows.append((t, model_spec.name, lab, p, r, f))
    return rows


def write_sweep(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["threshold", "model", "label", "precision", "recall", "f1"])
        for t, model, lab, p, r, f in rows:
            w.writerow([f"{t:g}", model, lab.slug if hasattr(lab, "slug") else lab,
                        f"{p:.6f}", f"{r:.6f}", f"{f:.6f}"])
