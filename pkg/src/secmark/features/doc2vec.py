"""PV-DBOW sentence vectors: a sentence vector is trained to predict its own words."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit

from ..errors import DataError
from ..sgns import draw_negatives, noise_distribution, sgns_train
from .sparse import SparseVector


@njit(cache=True)
def _infer_kernel(v, targets, offsets, w_out, steps, lr):
    dim = v.shape[1]
    n_t = targets.shape[1]
    grad = np.zeros(dim)
    for d in range(v.shape[0]):
        a, b = offsets[d], offsets[d + 1]
        for _ in range(steps):
            grad[:] = 0.0
            for p in range(a, b):
                for k in range(n_t):
                    w = targets[p, k]
                    s = 0.0
                    for j in range(dim):
                        s += v[d, j] * w_out[w, j]
                    g = 1.0 / (1.0 + np.exp(-s)) - (1.0 if k == 0 else 0.0)
                    for j in range(dim):
                        grad[j] += g * w_out[w, j]
            for j in range(dim):
                v[d, j] -= lr * grad[j] / (b - a)


@dataclass
class DocVectorModel:
    dim: int
    word_vectors: np.ndarray          # output (context) vectors, V x dim
    word_counts: np.ndarray
    infer_steps: int = 50
    infer_lr: float = 0.1
    negatives: int = 5
    seed: int = 0
    losses: list = field(default_factory=list)

    def __post_init__(self):
        if not np.all(np.isfinite(self.word_vectors)):
            raise DataError("non-finite doc2vec parameters")


def train_doc2vec(docs: Sequence[Sequence[int]], n_words: int, dim: int = 40, negatives: int = 5,
                  epochs: int = 20, seed: int = 0, lr: float = 0.025, window: int | None = None,
                  infer_steps: int = 50, infer_lr: float = 0.1) -> DocVectorModel:
    """``window`` is accepted for interface symmetry; PV-DBOW has no context window."""
    if dim < 2:
        raise DataError("doc2vec dimension must be >= 2")
    docs = [np.asarray(d, dtype=np.int64) for d in docs]
    lengths = np.array([d.size for d in docs], dtype=np.int64)
    words = np.concatenate(docs) if docs else np.zeros(0, np.int64)
    if words.size == 0:
        raise DataError("cannot train doc2vec on an empty corpus")
    doc_ids = np.repeat(np.arange(len(docs)), lengths)
    counts = np.bincount(words, minlength=n_words)
    _, w_out, losses = sgns_train(doc_ids, words, len(docs), n_words, dim, counts,
                                  negatives=negatives, epochs=epochs, lr=lr, rng=seed)
    return DocVectorModel(dim, w_out, counts, infer_steps, infer_lr, negatives, seed, losses)


def infer_docvecs(docs: Sequence[Sequence[int]], model: DocVectorModel) -> np.ndarray:
    """Fit a fresh vector per document against frozen word vectors.

    Initial vector and negatives come from a stream seeded by (seed, word ids), and
    each document's optimisation is independent of the others in the batch.
    """
    docs = [np.asarray(d, dtype=np.int64) for d in docs]
    out = np.zeros((len(docs), model.dim))
    live = [i for i, d in enumerate(docs) if d.size]
    if not live:
        return out
    cdf = noise_distribution(model.word_counts)
    vecs, pair_targets = [], []
    for i in live:
        d = docs[i]
        rng = np.random.default_rng([model.seed, d.size, *d.tolist()])
        vecs.append((rng.random(model.dim) - 0.5) / model.dim)
        negs = draw_negatives(rng, cdf, (d.size, model.negatives))
        pair_targets.append(np.concatenate([d[:, None], negs], axis=1))
    v = np.array(vecs)
    targets = np.concatenate(pair_targets)
    offsets = np.zeros(len(live) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([t.shape[0] for t in pair_targets])
    _infer_kernel(v, targets, offsets, model.word_vectors, model.infer_steps, model.infer_lr)
    out[live] = v
    return out


def infer_docvec(word_ids: Sequence[int], model: DocVectorModel) -> np.ndarray:
    return infer_docvecs([word_ids], model)[0]


def doc2vec_features(word_ids: Sequence[int], model: DocVectorModel) -> SparseVector:
    return SparseVector.from_dense(infer_docvec(word_ids, model))
