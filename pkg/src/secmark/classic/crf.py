"""Linear-chain CRF over sentence sequences with windowed state features.

A state weight ``W[o, y, d]`` fires at position ``t`` when dimension ``d`` is
active in the sentence at ``t + o``; positions outside the document add
nothing.  Transitions are a plain L x L matrix (first order).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize
from scipy.special import logsumexp
from sklearn.base import BaseEstimator

from .. import serialization
from ..corpus import LABELS, N_LABELS
from ..errors import DataError, NumericalError
from ..features.sparse import SparseVector, to_csr
from ..validation import check_is_fitted, check_label_array, check_random_state

DEFAULT_OFFSETS = (-2, -1, 0, 1, 2)


@dataclass(frozen=True)
class CrfTemplate:
    offsets: tuple[int, ...] = DEFAULT_OFFSETS
    include_transitions: bool = True

    def __post_init__(self):
        offs = tuple(int(o) for o in self.offsets)
        if list(offs) != sorted(set(offs)):
            raise DataError("CRF offsets must be sorted and unique")
        if 0 not in offs:
            raise DataError("CRF offsets must contain 0")
        if not self.include_transitions:
            raise DataError("linear-chain CRF always includes transitions")
        object.__setattr__(self, "offsets", offs)

    @classmethod
    def window(cls, radius: int) -> "CrfTemplate":
        return cls(tuple(range(-radius, radius + 1)))


@dataclass
class CrfModel:
    state: np.ndarray  # (n_offsets, L, D)
    transitions: np.ndarray  # (L, L), from -> to
    template: CrfTemplate = field(default_factory=CrfTemplate)
    feature_names: tuple[str, ...] = ()
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        self.state = np.asarray(self.state, dtype=np.float64)
        self.transitions = np.asarray(self.transitions, dtype=np.float64)
        n_labels = self.transitions.shape[0]
        if self.state.ndim != 3 or self.state.shape[:2] != (len(self.template.offsets), n_labels):
            raise DataError("state weights must be (n_offsets, L, D)")
        if self.transitions.shape != (n_labels, n_labels):
            raise DataError("transition weights must be L x L")
        if not (np.all(np.isfinite(self.state)) and np.all(np.isfinite(self.transitions))):
            raise NumericalError("non-finite CRF weight")

    @classmethod
    def zeros(cls, n_features, template=None, n_labels=N_LABELS, feature_names=()):
        template = template or CrfTemplate()
        return cls(np.zeros((len(template.offsets), n_labels, n_features)), np.zeros((n_labels, n_labels)),
                   template, tuple(feature_names))

    @property
    def n_labels(self):
        return self.transitions.shape[0]

    @property
    def n_features(self):
        return self.state.shape[2]

    def flat(self) -> np.ndarray:
        return np.concatenate([self.state.ravel(), self.transitions.ravel()])

    def with_flat(self, theta) -> "CrfModel":
        k = self.state.size
        return CrfModel(theta[:k].reshape(self.state.shape), theta[k:].reshape(self.transitions.shape),
                        self.template, self.feature_names, self.config)

    def save(self, path):
        serialization.save(path, "crf", {"offsets": list(self.template.offsets),
                                         "features": list(self.feature_names), "config": self.config},
                           {"state": self.state, "transitions": self.transitions})

    @classmethod
    def load(cls, path):
        _, meta, secs = serialization.load(path, "crf")
        return cls(secs["state"], secs["transitions"], CrfTemplate(tuple(meta["offsets"])),
                   tuple(meta["features"]), meta["config"])

    def dump_weights(self, path) -> None:
        """Text audit dump of nonzero weights: ``label,offset,feature,weight``."""
        names = self.feature_names or tuple(str(i) for i in range(self.n_features))
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["label", "offset", "feature", "weight"])
            for oi, off in enumerate(self.template.offsets):
                for y in range(self.n_labels):
                    for d in np.flatnonzero(self.state[oi, y]):
                        w.writerow([_label_name(y), off, names[d], repr(float(self.state[oi, y, d]))])
            for a in range(self.n_labels):
                for b in range(self.n_labels):
                    if self.transitions[a, b] != 0:
                        w.writerow([_label_name(b), "trans", _label_name(a),
                                    repr(float(self.transitions[a, b]))])


def _label_name(y):
    return LABELS[y].slug if y < N_LABELS else str(y)


def _doc_matrix(doc, n_features):
    if isinstance(doc, (list, tuple)) and (not doc or isinstance(doc[0], SparseVector)):
        for v in doc:
            if v.indices.size and v.indices[-1] >= n_features:
                raise DataError(f"feature index {int(v.indices[-1])} outside a {n_features}-dim model")
        return to_csr(list(doc), n_features)
    X = sp.csr_matrix(doc, dtype=np.float64)
    if X.shape[1] != n_features:
        raise DataError(f"expected {n_features} features, got {X.shape[1]}")
    return X


def crf_score_table(model: CrfModel, doc) -> tuple[np.ndarray, np.ndarray]:
    """(T x L state scores, L x L transition scores) for one document."""
    X = _doc_matrix(doc, model.n_features)
    T = X.shape[0]
    state = np.zeros((T, model.n_labels))
    for oi, off in enumerate(model.template.offsets):
        lo, hi = max(0, -off), min(T, T - off)
        if lo >= hi:
            continue
        state[lo:hi] += np.asarray(X[lo + off:hi + off] @ model.state[oi].T)
    return state, model.transitions.copy()


def crf_log_partition(state: np.ndarray, trans: np.ndarray) -> float:
    if state.shape[0] < 1:
        raise DataError("CRF document needs at least one sentence")
    alpha = state[0].copy()
    for t in range(1, state.shape[0]):
        alpha = state[t] + logsumexp(alpha[:, None] + trans, axis=0)
    return float(logsumexp(alpha))


def path_score(state, trans, labels) -> float:
    labels = np.asarray(labels)
    s = state[np.arange(labels.size), labels].sum()
    if labels.size > 1:
        s += trans[labels[:-1], labels[1:]].sum()
    return float(s)


def forward_backward(state, trans):
    """Log-space forward/backward; returns (log Z, node marginals T x L, edge marginals sum L x L)."""
    T, L = state.shape
    alpha = np.empty((T, L))
    beta = np.zeros((T, L))
    alpha[0] = state[0]
    for t in range(1, T):
        alpha[t] = state[t] + logsumexp(alpha[t - 1][:, None] + trans, axis=0)
    for t in range(T - 2, -1, -1):
        beta[t] = logsumexp(trans + (state[t + 1] + beta[t + 1])[None, :], axis=1)
    logz = float(logsumexp(alpha[-1]))
    node = np.exp(alpha + beta - logz)
    edge = np.zeros((L, L))
    for t in range(1, T):
        edge += np.exp(alpha[t - 1][:, None] + trans + (state[t] + beta[t])[None, :] - logz)
    return logz, node, edge


def crf_gradient(model: CrfModel, doc, labels, l2: float = 0.0):
    """(NLL + l2/2 ||theta||^2, gradient as a CrfModel-shaped pair (d_state, d_trans))."""
    X = _doc_matrix(doc, model.n_features)
    y = np.asarray(labels, dtype=np.int64)
    if y.size != X.shape[0]:
        raise DataError(f"{y.size} labels for {X.shape[0]} sentences")
    state, trans = crf_score_table(model, X)
    logz, node, edge = forward_backward(state, trans)
    nll = logz - path_score(state, trans, y)
    T = y.size
    diff = node.copy()
    diff[np.arange(T), y] -= 1.0
    g_state = np.zeros_like(model.state)
    for oi, off in enumerate(model.template.offsets):
        lo, hi = max(0, -off), min(T, T - off)
        if lo >= hi:
            continue
        g_state[oi] = np.asarray(X[lo + off:hi + off].T @ diff[lo:hi]).T
    g_trans = edge.copy()
    np.add.at(g_trans, (y[:-1], y[1:]), -1.0)
    if l2:
        nll += 0.5 * l2 * (np.sum(model.state ** 2) + np.sum(model.transitions ** 2))
        g_state += l2 * model.state
        g_trans += l2 * model.transitions
    return float(nll), (g_state, g_trans)


def crf_viterbi(model: CrfModel, doc) -> tuple[list, float]:
    state, trans = crf_score_table(model, doc)
    labels, score = viterbi_decode(state, trans)
    if model.n_labels == N_LABELS:
        labels = [LABELS[i] for i in labels]
    return labels, score


def viterbi_decode(state, trans):
    """Best path; every argmax takes the first (lowest-label) maximum."""
    T, L = state.shape
    if T == 0:
        raise DataError("CRF document needs at least one sentence")
    delta = state[0].copy()
    back = np.zeros((T, L), dtype=np.int64)
    for t in range(1, T):
        cand = delta[:, None] + trans
        back[t] = np.argmax(cand, axis=0)
        delta = cand[back[t], np.arange(L)] + state[t]
    path = [int(np.argmax(delta))]
    for t in range(T - 1, 0, -1):
        path.append(int(back[t, path[-1]]))
    path.reverse()
    return path, float(np.max(delta))


class _Batch:
    """All training documents stacked; precomputes the shifted row blocks per offset."""

    def __init__(self, docs, labels, offsets, n_features):
        mats = [_doc_matrix(d, n_features) for d in docs]
        self.lengths = np.array([m.shape[0] for m in mats], dtype=np.int64)
        if np.any(self.lengths == 0):
            raise DataError("CRF documents must contain at least one sentence")
        self.X = sp.vstack(mats, format="csr") if mats else sp.csr_matrix((0, n_features))
        self.y = np.concatenate([np.asarray(v, dtype=np.int64) for v in labels])
        if self.y.size != self.X.shape[0]:
            raise DataError("labels not aligned with sentences")
        starts = np.concatenate([[0], np.cumsum(self.lengths)[:-1]])
        doc_of = np.repeat(np.arange(len(mats)), self.lengths)
        pos = np.arange(self.y.size) - starts[doc_of]
        self.shifted = []
        for off in offsets:
            ok = (pos + off >= 0) & (pos + off < self.lengths[doc_of])
            tgt = np.flatnonzero(ok)
            self.shifted.append((tgt, self.X[tgt + off]))
        # padded (B, Tmax) index of each stacked row
        self.T = int(self.lengths.max())
        self.B = len(mats)
        self.flat_index = doc_of * self.T + pos
        self.mask = np.arange(self.T)[None, :] < self.lengths[:, None]

    def states(self, W):
        out = np.zeros((self.y.size, W.shape[1]))
        for (tgt, Xs), Wo in zip(self.shifted, W):
            out[tgt] += np.asarray(Xs @ Wo.T)
        return out


def _batched_objective(W, trans, batch: _Batch):
    """Sum over documents of NLL, with marginals from a padded batched forward-backward."""
    L = trans.shape[0]
    B, T = batch.B, batch.T
    flat_state = batch.states(W)
    state = np.zeros((B * T, L))
    state[batch.flat_index] = flat_state
    state = state.reshape(B, T, L)
    lengths = batch.lengths
    alpha = np.empty((B, T, L))
    beta = np.zeros((B, T, L))
    alpha[:, 0] = state[:, 0]
    for t in range(1, T):
        step = state[:, t] + logsumexp(alpha[:, t - 1, :, None] + trans[None], axis=1)
        alpha[:, t] = np.where((t < lengths)[:, None], step, alpha[:, t - 1])
    for t in range(T - 2, -1, -1):
        step = logsumexp(trans[None] + (state[:, t + 1] + beta[:, t + 1])[:, None, :], axis=2)
        beta[:, t] = np.where((t < lengths - 1)[:, None], step, 0.0)
    logz = logsumexp(alpha[:, -1], axis=1)
    node = np.exp(alpha + beta - logz[:, None, None]).reshape(B * T, L)[batch.flat_index]
    edge_terms = np.exp(alpha[:, :-1, :, None] + trans[None, None] + (state[:, 1:] + beta[:, 1:])[:, :, None, :]
                        - logz[:, None, None, None])
    edge = (edge_terms * batch.mask[:, 1:, None, None]).sum(axis=(0, 1))
    y = batch.y
    gold = flat_state[np.arange(y.size), y].sum()
    starts = np.concatenate([[0], np.cumsum(lengths)[:-1]])
    inner = np.ones(y.size, dtype=bool)
    inner[starts] = False
    idx = np.flatnonzero(inner)
    gold += trans[y[idx - 1], y[idx]].sum()
    nll = float(logz.sum() - gold)
    diff = node
    diff[np.arange(y.size), y] -= 1.0
    g_state = np.empty_like(W)
    for oi, (tgt, Xs) in enumerate(batch.shifted):
        g_state[oi] = np.asarray(Xs.T @ diff[tgt]).T
    g_trans = edge
    np.add.at(g_trans, (y[idx - 1], y[idx]), -1.0)
    return nll, g_state, g_trans


def crf_objective(model: CrfModel, docs, labels, l2=1.0):
    """Corpus objective and flat gradient (used by the trainer and its tests)."""
    batch = _Batch(docs, labels, model.template.offsets, model.n_features)
    return _objective_flat(model.flat(), model, batch, l2)


def _objective_flat(theta, shape_model, batch, l2):
    k = shape_model.state.size
    W = theta[:k].reshape(shape_model.state.shape)
    trans = theta[k:].reshape(shape_model.transitions.shape)
    nll, gW, gT = _batched_objective(W, trans, batch)
    f = nll + 0.5 * l2 * float(theta @ theta)
    g = np.concatenate([gW.ravel(), gT.ravel()]) + l2 * theta
    if not np.isfinite(f):
        raise NumericalError("CRF objective became non-finite")
    return f, g


def crf_train(docs: Sequence, labels: Sequence, l2: float = 1.0, template: CrfTemplate | None = None,
              optimizer: str = "lbfgs", max_iter: int = 200, tol: float = 1e-5, memory: int = 10,
              lr: float = 0.05, batch_docs: int = 16, seed=0, feature_names=(), n_features=None) -> CrfModel:
    """Minimise summed document NLL + l2/2 ||theta||^2.

    ``optimizer='lbfgs'`` runs full-batch L-BFGS; ``'sgd'`` runs ``max_iter``
    epochs of mini-batch gradient descent over shuffled documents.
    """
    docs = list(docs)
    labels = [check_label_array(v) for v in labels]
    if not docs:
        raise DataError("cannot train a CRF on an empty corpus")
    if len(docs) != len(labels):
        raise DataError(f"{len(docs)} documents for {len(labels)} label sequences")
    if l2 < 0:
        raise DataError("l2 must be non-negative")
    template = template or CrfTemplate()
    if n_features is None:
        first = docs[0]
        if isinstance(first, (list, tuple)):
            n_features = max((int(v.indices[-1]) + 1 for d in docs for v in d if v.indices.size), default=0)
        else:
            n_features = first.shape[1]
    if n_features == 0:
        raise DataError("empty feature space: nothing to train on")
    model = CrfModel.zeros(n_features, template, feature_names=feature_names)
    config = {"l2": l2, "optimizer": optimizer, "max_iter": max_iter, "tol": tol}
    if optimizer == "lbfgs":
        batch = _Batch(docs, labels, template.offsets, n_features)
        res = minimize(_objective_flat, model.flat(), args=(model, batch, l2), jac=True, method="L-BFGS-B",
                       options={"maxcor": memory, "maxiter": max_iter, "gtol": tol, "ftol": 1e-12})
        theta = res.x
        config["iterations"] = int(res.nit)
    elif optimizer == "sgd":
        rng = check_random_state(seed)
        theta = model.flat()
        n = len(docs)
        step = 0
        for _ in range(max_iter):
            order = rng.permutation(n)
            for start in range(0, n, batch_docs):
                idx = order[start:start + batch_docs]
                b = _Batch([docs[i] for i in idx], [labels[i] for i in idx], template.offsets, n_features)
                f, g = _objective_flat(theta, model, b, l2 * idx.size / n)
                theta = theta - lr / (1.0 + 0.01 * step) * g / idx.size
                step += 1
        config["seed"] = seed if isinstance(seed, (int, type(None))) else str(seed)
    else:
        raise DataError(f"unknown CRF optimizer {optimizer!r}")
    out = model.with_flat(theta)
    out.config = config
    return out


class LinearChainCRF(BaseEstimator):
    """sklearn-style wrapper: ``X`` is a list of per-document CSR matrices, ``y`` a list of label arrays."""

    def __init__(self, window=2, l2=1.0, optimizer="lbfgs", max_iter=200, tol=1e-5, seed=0):
        self.window = window
        self.l2 = l2
        self.optimizer = optimizer
        self.max_iter = max_iter
        self.tol = tol
        self.seed = seed

    def fit(self, X, y):
        X = list(X)
        n_features = X[0].shape[1] if X and not isinstance(X[0], (list, tuple)) else None
        self.model_ = crf_train(X, y, self.l2, CrfTemplate.window(self.window), self.optimizer,
                                self.max_iter, self.tol, seed=self.seed, n_features=n_features)
        self.n_features_in_ = self.model_.n_features
        return self

    def predict(self, X) -> list[np.ndarray]:
        check_is_fitted(self, "model_")
        out = []
        for doc in X:
            state, trans = crf_score_table(self.model_, doc)
            out.append(np.array(viterbi_decode(state, trans)[0], dtype=np.int64))
        return out

    def score(self, X, y):
        pred = np.concatenate(self.predict(X))
        gold = np.concatenate([check_label_array(v) for v in y])
        return float(np.mean(pred == gold))
