"""Latent Dirichlet allocation by collapsed Gibbs sampling.

Each sentence is one LDA document.  Random draws are generated with numpy
outside the compiled sweep so results depend only on the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit

from ..errors import DataError
from .sparse import SparseVector


@njit(cache=True)
def _gibbs_sweep(words, docs, z, ndk, nkw, nk, alpha, beta, vbeta, u):
    K = nk.shape[0]
    cdf = np.empty(K)
    for i in range(words.shape[0]):
        w = words[i]
        d = docs[i]
        k = z[i]
        ndk[d, k] -= 1
        nkw[k, w] -= 1
        nk[k] -= 1
        total = 0.0
        for j in range(K):
            total += (ndk[d, j] + alpha) * (nkw[j, w] + beta) / (nk[j] + vbeta)
            cdf[j] = total
        r = u[i] * total
        k = 0
        while k < K - 1 and cdf[k] <= r:
            k += 1
        z[i] = k
        ndk[d, k] += 1
        nkw[k, w] += 1
        nk[k] += 1


@njit(cache=True)
def _infer(words, offsets, z, u, nkw, nk, alpha, beta, vbeta, iters, burn):
    K = nk.shape[0]
    n_docs = offsets.shape[0] - 1
    theta = np.zeros((n_docs, K))
    cdf = np.empty(K)
    ndk = np.zeros(K)
    for d in range(n_docs):
        a, b = offsets[d], offsets[d + 1]
        n = b - a
        ndk[:] = 0.0
        for i in range(a, b):
            ndk[z[i]] += 1
        samples = 0
        for it in range(iters):
            for i in range(a, b):
                w = words[i]
                ndk[z[i]] -= 1
                total = 0.0
                for j in range(K):
                    total += (ndk[j] + alpha) * (nkw[j, w] + beta) / (nk[j] + vbeta)
                    cdf[j] = total
                r = u[a * iters + it * n + (i - a)] * total
                k = 0
                while k < K - 1 and cdf[k] <= r:
                    k += 1
                z[i] = k
                ndk[k] += 1
            if it >= burn:
                for j in range(K):
                    theta[d, j] += (ndk[j] + alpha) / (n + K * alpha)
                samples += 1
        for j in range(K):
            theta[d, j] /= samples
    return theta


@dataclass
class TopicModel:
    n_topics: int
    alpha: float
    beta: float
    topic_word_counts: np.ndarray
    topic_totals: np.ndarray
    vocabulary: tuple[str, ...] = ()
    perplexity_trace: list = field(default_factory=list)

    def __post_init__(self):
        if not np.array_equal(self.topic_totals, self.topic_word_counts.sum(axis=1)):
            raise DataError("topic totals disagree with topic-word counts")
        if np.any(self.topic_word_counts < 0):
            raise DataError("negative topic-word count")

    @property
    def n_words(self):
        return self.topic_word_counts.shape[1]

    def topic_word_distribution(self) -> np.ndarray:
        phi = self.topic_word_counts + self.beta
        return phi / phi.sum(axis=1, keepdims=True)


def _flatten(docs):
    words = np.concatenate([np.asarray(d, dtype=np.int64) for d in docs]) if docs else np.zeros(0, np.int64)
    lengths = np.array([len(d) for d in docs], dtype=np.int64)
    doc_ids = np.repeat(np.arange(len(docs), dtype=np.int64), lengths)
    return words, doc_ids


def _log_perplexity(words, doc_ids, ndk, nkw, alpha, beta):
    theta = ndk + alpha
    theta = theta / theta.sum(axis=1, keepdims=True)
    phi = nkw + beta
    phi = phi / phi.sum(axis=1, keepdims=True)
    p = np.einsum("nk,kn->n", theta[doc_ids], phi[:, words])
    return float(-np.mean(np.log(p)))


def train_lda(docs: Sequence[Sequence[int]], n_words: int, n_topics: int = 40, alpha: float | None = None,
              beta: float = 0.01, iters: int = 500, seed: int = 0, track_perplexity: bool = False,
              vocabulary: Sequence[str] = ()) -> TopicModel:
    """Fit topic-word counts on word-id documents by collapsed Gibbs sampling."""
    if n_topics < 2:
        raise DataError("LDA needs at least 2 topics")
    if iters < 1:
        raise DataError("LDA needs at least one iteration")
    words, doc_ids = _flatten(list(docs))
    if words.size == 0:
        raise DataError("cannot train LDA on an empty corpus")
    if words.max() >= n_words or words.min() < 0:
        raise DataError("word id outside the vocabulary")
    alpha = 50.0 / n_topics if alpha is None else float(alpha)
    rng = np.random.default_rng(seed)
    z = rng.integers(n_topics, size=words.size).astype(np.int64)
    ndk = np.zeros((len(docs), n_topics), dtype=np.int64)
    nkw = np.zeros((n_topics, n_words), dtype=np.int64)
    np.add.at(ndk, (doc_ids, z), 1)
    np.add.at(nkw, (z, words), 1)
    nk = nkw.sum(axis=1)
    trace = []
    if track_perplexity:
        trace.append(np.exp(_log_perplexity(words, doc_ids, ndk, nkw, alpha, beta)))
    for _ in range(iters):
        u = rng.random(words.size)
        _gibbs_sweep(words, doc_ids, z, ndk, nkw, nk, alpha, beta, n_words * beta, u)
        if track_perplexity:
            trace.append(np.exp(_log_perplexity(words, doc_ids, ndk, nkw, alpha, beta)))
    model = TopicModel(n_topics, alpha, beta, nkw, nk.copy(), tuple(vocabulary), trace)
    model.doc_topic_counts = ndk
    return model


def infer_topics(docs: Sequence[Sequence[int]], model: TopicModel, iters: int = 50, seed: int = 0) -> np.ndarray:
    """Per-document topic distributions with the topic-word counts frozen.

    Each document draws from its own stream seeded by (seed, word ids), so a
    document's result does not depend on which other documents are batched with it.
    Empty documents get the uniform distribution.
    """
    K = model.n_topics
    docs = [np.asarray(d, dtype=np.int64) for d in docs]
    out = np.full((len(docs), K), 1.0 / K)
    live = [i for i, d in enumerate(docs) if d.size]
    if not live:
        return out
    zs, us, ws = [], [], []
    for i in live:
        d = docs[i]
        rng = np.random.default_rng([seed, d.size, *d.tolist()])
        zs.append(rng.integers(K, size=d.size))
        us.append(rng.random(d.size * iters))
        ws.append(d)
    offsets = np.zeros(len(live) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([w.size for w in ws])
    burn = iters // 2
    theta = _infer(np.concatenate(ws), offsets, np.concatenate(zs).astype(np.int64), np.concatenate(us),
                   model.topic_word_counts, model.topic_totals, model.alpha, model.beta,
                   model.n_words * model.beta, iters, burn)
    theta /= theta.sum(axis=1, keepdims=True)
    out[live] = theta
    return out


def lda_features(word_ids: Sequence[int], model: TopicModel, infer_iters: int = 50, seed: int = 0) -> SparseVector:
    return SparseVector.from_dense(infer_topics([word_ids], model, infer_iters, seed)[0])
