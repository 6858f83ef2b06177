"""Input validation helpers shared by the estimators."""

from __future__ import annotations

import numpy as np

from .corpus import N_LABELS, Corpus, Document, SectionLabel
from .errors import DataError, NotFittedError


def check_documents(X, tokenized=False, labeled=False, allow_empty=False) -> list[Document]:
    if isinstance(X, Document):
        docs = [X]
    elif isinstance(X, Corpus):
        docs = list(X.documents)
    else:
        try:
            docs = list(X)
        except TypeError:
            raise DataError(f"expected documents, got {type(X).__name__}") from None
    for doc in docs:
        if not isinstance(doc, Document):
            raise DataError(f"expected Document, got {type(doc).__name__}")
        if tokenized and not doc.is_tokenized:
            raise DataError(f"document {doc.id} is not segmented")
        if labeled and not doc.is_labeled:
            raise DataError(f"document {doc.id} has unlabeled sentences")
    if not docs and not allow_empty:
        raise DataError("no documents given")
    return docs


def document_labels(doc: Document) -> np.ndarray:
    if not doc.is_labeled:
        raise DataError(f"document {doc.id} has unlabeled sentences")
    return np.array([int(lab) for lab in doc.labels], dtype=np.int64)


def check_label_array(y, n=None) -> np.ndarray:
    arr = np.asarray(y)
    if arr.dtype.kind in "iu":
        y = arr.astype(np.int64).ravel()
    else:
        y = np.asarray([int(SectionLabel.parse(v)) for v in np.ravel(y)], dtype=np.int64)
    if n is not None and y.size != n:
        raise DataError(f"{y.size} labels for {n} samples")
    if y.size and (y.min() < 0 or y.max() >= N_LABELS):
        raise DataError("label outside the six section labels")
    return y


def check_is_fitted(estimator, attribute) -> None:
    if getattr(estimator, attribute, None) is None:
        raise NotFittedError(f"{type(estimator).__name__} is not fitted yet; call fit first")


def check_random_state(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
