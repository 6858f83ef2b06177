"""Multinomial logistic regression and one-vs-rest linear SVM on sparse sentence rows.

Both trainers work on max-abs scaled features (each column divided by its
largest absolute training value) so one step size suits count, length and
probability features alike.  Weights are mapped back to the original space
before they are returned, so predictions never need the scaler.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, ClassifierMixin

from .. import serialization
from ..corpus import LABELS, N_LABELS, SectionLabel
from ..errors import DataError, NumericalError
from ..features.sparse import SparseVector
from ..validation import check_is_fitted, check_label_array, check_random_state


@dataclass
class LinearModel:
    kind: str
    weights: np.ndarray  # (L, D + 1); last column is the bias
    feature_names: tuple[str, ...] = ()
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("LR", "SVM"):
            raise DataError(f"unknown linear model kind {self.kind!r}")
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2 or self.weights.shape[0] != N_LABELS:
            raise DataError(f"weights must have {N_LABELS} rows")
        if not np.all(np.isfinite(self.weights)):
            raise NumericalError("non-finite weight in linear model")

    @property
    def n_features(self):
        return self.weights.shape[1] - 1

    def decision(self, X) -> np.ndarray:
        X = _as_csr(X, self.n_features)
        return np.asarray(X @ self.weights[:, :-1].T) + self.weights[:, -1]

    def save(self, path):
        serialization.save(path, "linear", {"kind": self.kind, "features": list(self.feature_names),
                                            "config": self.config}, {"weights": self.weights})

    @classmethod
    def load(cls, path):
        _, meta, secs = serialization.load(path, "linear")
        return cls(meta["kind"], secs["weights"], tuple(meta["features"]), meta["config"])


def _as_csr(X, n_features=None):
    if isinstance(X, SparseVector):
        X = [X]
    if isinstance(X, (list, tuple)):
        if n_features is None:
            n_features = max((int(v.indices[-1]) + 1 for v in X if v.indices.size), default=0)
        for v in X:
            if v.indices.size and v.indices[-1] >= n_features:
                raise DataError(f"feature index {int(v.indices[-1])} outside a {n_features}-dim space")
        from ..features.sparse import to_csr
        return to_csr(X, n_features)
    X = sp.csr_matrix(X, dtype=np.float64)
    if n_features is not None and X.shape[1] != n_features:
        raise DataError(f"expected {n_features} features, got {X.shape[1]}")
    return X


def _check_training(X, y):
    X = _as_csr(X)
    if X.shape[1] == 0:
        raise DataError("empty feature space: nothing to train on")
    if X.shape[0] == 0:
        raise DataError("empty training set")
    y = check_label_array(y, X.shape[0])
    if not np.all(np.isfinite(X.data)):
        raise DataError("non-finite feature value")
    return X, y


def _scaler(X):
    scale = np.asarray(abs(X).max(axis=0).todense()).ravel()
    scale[scale == 0] = 1.0
    return scale


def softmax(scores):
    z = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def train_logreg(X, y, l2=0.1, lr=0.5, epochs=50, batch_size=32, seed=0, feature_names=()) -> LinearModel:
    """Softmax regression by mini-batch gradient descent.

    Minimises mean cross-entropy + (l2 / 2n) * ||W||^2 (bias unregularised).
    """
    X, y = _check_training(X, y)
    if l2 < 0 or lr <= 0 or epochs < 0 or batch_size < 1:
        raise DataError("invalid logistic regression hyper-parameters")
    n, d = X.shape
    scale = _scaler(X)
    Xs = (X @ sp.diags(1.0 / scale)).tocsr()
    W = np.zeros((N_LABELS, d))
    b = np.zeros(N_LABELS)
    onehot = np.eye(N_LABELS)[y]
    rng = check_random_state(seed)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            xb = Xs[idx]
            p = softmax(np.asarray(xb @ W.T) + b)
            g = (p - onehot[idx]) / idx.size
            gW = np.asarray((xb.T @ g).T) + (l2 / n) * W
            W -= lr * gW
            b -= lr * g.sum(axis=0)
    weights = np.hstack([W / scale, b[:, None]])
    return LinearModel("LR", weights, tuple(feature_names),
                       {"l2": l2, "lr": lr, "epochs": epochs, "batch_size": batch_size, "seed": _seed_repr(seed)})


def train_svm(X, y, C=10.0, epochs=50, batch_size=32, seed=0, feature_names=()) -> LinearModel:
    """One-vs-rest linear SVM, primal sub-gradient descent on hinge loss + L2.

    Objective per label: lam/2 ||w||^2 + mean hinge, lam = 1 / (C n).  Step
    size follows the Pegasos schedule 1 / (lam (t + t0)) with t0 = 1 / lam so
    the first step is 1, and the returned weights average the iterates of the
    second half of training.  The bias is an unregularised extra column.
    """
    X, y = _check_training(X, y)
    if C <= 0 or epochs < 0 or batch_size < 1:
        raise DataError("invalid SVM hyper-parameters")
    n, d = X.shape
    scale = _scaler(X)
    Xs = (X @ sp.diags(1.0 / scale)).tocsr()
    lam = 1.0 / (C * n)
    t0 = 1.0 / lam
    signs = np.where(np.eye(N_LABELS, dtype=bool)[y], 1.0, -1.0)  # (n, L)
    W = np.zeros((N_LABELS, d))
    b = np.zeros(N_LABELS)
    W_avg = np.zeros_like(W)
    b_avg = np.zeros_like(b)
    n_avg = 0
    rng = check_random_state(seed)
    t = 0
    for epoch in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            xb = Xs[idx]
            s = signs[idx]
            margin = s * (np.asarray(xb @ W.T) + b)
            active = (margin < 1.0) * s / idx.size  # -d(hinge)/d(score)
            eta = 1.0 / (lam * (t + t0))
            W *= 1.0 - eta * lam
            W += eta * np.asarray((xb.T @ active).T)
            b += eta * active.sum(axis=0)
            t += 1
            if epoch >= epochs // 2:
                W_avg += W
                b_avg += b
                n_avg += 1
    if n_avg:
        W, b = W_avg / n_avg, b_avg / n_avg
    weights = np.hstack([W / scale, b[:, None]])
    return LinearModel("SVM", weights, tuple(feature_names),
                       {"C": C, "epochs": epochs, "batch_size": batch_size, "seed": _seed_repr(seed)})


def _seed_repr(seed):
    return seed if isinstance(seed, (int, type(None))) else str(seed)


def argmax_label(scores) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. the lowest label enum value
    return np.argmax(scores, axis=-1)


def predict_linear(model: LinearModel, vector: SparseVector):
    if vector.indices.size and vector.indices[-1] >= model.n_features:
        raise DataError(f"feature index {int(vector.indices[-1])} outside a {model.n_features}-dim model")
    scores = model.weights[:, vector.indices] @ vector.values + model.weights[:, -1]
    return LABELS[int(np.argmax(scores))], scores


def hinge_losses(model: LinearModel, X, y) -> np.ndarray:
    """Per-sample, per-label one-vs-rest hinge losses."""
    y = check_label_array(y)
    signs = np.where(np.eye(N_LABELS, dtype=bool)[y], 1.0, -1.0)
    return np.maximum(0.0, 1.0 - signs * model.decision(X))


class _LinearClassifier(ClassifierMixin, BaseEstimator):
    _kind = ""

    def _train(self, X, y):
        raise NotImplementedError

    def fit(self, X, y):
        self.model_ = self._train(X, y)
        self.n_features_in_ = self.model_.n_features
        self.classes_ = np.array(LABELS, dtype=object)
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        return self.model_.decision(X)

    def predict(self, X):
        return argmax_label(self.decision_function(X))

    def predict_labels(self, X) -> list[SectionLabel]:
        return [LABELS[i] for i in self.predict(X)]

    def score(self, X, y, sample_weight=None):
        return float(np.mean(self.predict(X) == check_label_array(y)))


class LogisticRegressionClassifier(_LinearClassifier):
    """Softmax regression; ``predict`` returns label indices (enum order)."""

    def __init__(self, l2=0.1, lr=0.5, epochs=50, batch_size=32, seed=0):
        self.l2 = l2
        self.lr = lr
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed

    def _train(self, X, y):
        return train_logreg(X, y, self.l2, self.lr, self.epochs, self.batch_size, self.seed)

    def predict_proba(self, X):
        return softmax(self.decision_function(X))


class LinearSVMClassifier(_LinearClassifier):
    def __init__(self, C=10.0, epochs=50, batch_size=32, seed=0):
        self.C = C
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed

    def _train(self, X, y):
        return train_svm(X, y, self.C, self.epochs, self.batch_size, self.seed)
