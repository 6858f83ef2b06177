"""k-means++ clustering and a PCA projection for inspecting word vectors."""

from __future__ import annotations

import numpy as np

from ..errors import DataError
from .embeddings import EmbeddingTable


def _sq_dists(X, C):
    return (X * X).sum(1)[:, None] - 2.0 * X @ C.T + (C * C).sum(1)[None, :]


def kmeans_pp_init(X, k, rng):
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    d2 = ((X - centers[0]) ** 2).sum(1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(d2 / total), rng.random(), side="right"))
            idx = min(idx, n - 1)
        centers.append(X[idx])
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(1))
    return np.array(centers)


def kmeans(X, k, seed=0, max_iter=100):
    """Lloyd iterations from k-means++ seeds; returns (labels, centroids, objective per iteration).

    An empty cluster keeps its previous centroid.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("k-means needs a non-empty 2-D matrix")
    if k < 1:
        raise DataError("k must be >= 1")
    if k > X.shape[0]:
        raise DataError(f"k={k} exceeds the number of points ({X.shape[0]})")
    rng = np.random.default_rng(seed)
    C = kmeans_pp_init(X, k, rng)
    trace = []
    labels = None
    for _ in range(max_iter):
        d = _sq_dists(X, C)
        new = np.argmin(d, axis=1)
        trace.append(float(np.maximum(d[np.arange(X.shape[0]), new], 0).sum()))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for j in range(k):
            members = X[labels == j]
            if members.size:
                C[j] = members.mean(axis=0)
    d = _sq_dists(X, C)
    labels = np.argmin(d, axis=1)
    return labels, C, trace


def pca_project(X, n_components=2):
    """Project onto the top principal axes from the covariance eigendecomposition.

    Axes are ordered by eigenvalue; each axis is signed so its largest-magnitude
    loading is positive.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] < 1:
        raise DataError("PCA needs at least one point")
    Xc = X - X.mean(axis=0)
    cov = Xc.T @ Xc / max(X.shape[0] - 1, 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(-vals, kind="stable")[:n_components]
    axes = vecs[:, order]
    flip = np.sign(axes[np.argmax(np.abs(axes), axis=0), np.arange(axes.shape[1])])
    axes = axes * np.where(flip == 0, 1.0, flip)
    return Xc @ axes, vals[order]


def cluster_embeddings(embeddings, k=5, seed=0):
    """(cluster per word, 2-D projection per word) for a table or a plain matrix.

    For an ``EmbeddingTable`` the padding and unknown rows are skipped, so
    results align with ``table.words[2:]``.
    """
    X = embeddings.vectors[2:] if isinstance(embeddings, EmbeddingTable) else np.asarray(embeddings, float)
    labels, _, _ = kmeans(X, k, seed)
    proj, _ = pca_project(X, 2)
    return labels, proj
