"""Feature assembly over all families, plus the sklearn-style featurizer."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ..corpus import Corpus, Document
from ..errors import DataError
from ..validation import check_documents, check_is_fitted
from .doc2vec import DocVectorModel, infer_docvecs, train_doc2vec
from .lda import TopicModel, infer_topics, train_lda
from .lexical import (
    bow_features,
    feature_words,
    governing_headings,
    heading_features,
    length_features,
    pos_features,
    pos_pairs,
    position_feature,
)
from .sparse import FeatureSpace, SparseVector, Vocabulary, build_vocabulary, to_csr

FAMILIES = ("bow", "pos", "lda", "d2v", "head", "loc", "len")


def _check_families(families):
    families = tuple(families)
    unknown = set(families) - set(FAMILIES)
    if unknown:
        raise DataError(f"unknown feature families: {sorted(unknown)}")
    if not families:
        raise DataError("no feature family enabled")
    return tuple(f for f in FAMILIES if f in families)


def _sentences(docs):
    for doc in docs:
        yield from doc.sentences


def heading_token_lists(docs) -> list:
    out = []
    for doc in docs:
        owners = governing_headings(doc.sentences)
        out.extend(None if o is None else doc.sentences[o].tokens for o in owners)
    return out


def word_id_docs(docs, vocab: Vocabulary) -> list[np.ndarray]:
    """Per-sentence arrays of in-vocabulary word ids (LDA / doc2vec input)."""
    out = []
    for s in _sentences(docs):
        ids = [vocab.get(w) for w in feature_words(s.tokens)]
        out.append(np.array([i for i in ids if i is not None], dtype=np.int64))
    return out


def build_vocabularies(docs, min_count=1):
    docs = list(docs)
    vocab = build_vocabulary((feature_words(s.tokens) for s in _sentences(docs)), min_count)
    pos_vocab = build_vocabulary((pos_pairs(s.tokens) for s in _sentences(docs)), min_count)
    head_vocab = build_vocabulary(
        (feature_words(s.tokens) for s in _sentences(docs) if s.is_heading), min_count)
    return vocab, pos_vocab, head_vocab


def feature_names(families, vocab, pos_vocab, head_vocab, n_topics=0, d2v_dim=0) -> list[str]:
    names = []
    for fam in families:
        if fam == "bow":
            names += [f"bow:{w}" for w in vocab.words]
        elif fam == "pos":
            names += [f"pos:{p}" for p in pos_vocab.words]
        elif fam == "lda":
            names += [f"lda:{k}" for k in range(n_topics)]
        elif fam == "d2v":
            names += [f"d2v:{k}" for k in range(d2v_dim)]
        elif fam == "head":
            names += [f"head:{w}" for w in head_vocab.words]
        elif fam == "loc":
            names.append("loc")
        elif fam == "len":
            names += ["len_char", "len_word"]
    return names


def assemble_features(corpus: Corpus | Sequence[Document], families=FAMILIES, *, vocab=None, pos_vocab=None,
                      head_vocab=None, topic_model: TopicModel | None = None,
                      docvec_model: DocVectorModel | None = None, min_count: int = 1,
                      lda_infer_iters: int = 50, seed: int = 0):
    """Return (FeatureSpace, per-sentence SparseVector list) in corpus sentence order.

    Vocabularies not supplied are built from ``corpus``; LDA and doc2vec
    families need their trained models.
    """
    docs = check_documents(corpus, tokenized=True)
    families = _check_families(families)
    if "lda" in families and topic_model is None:
        raise DataError("feature family 'lda' enabled without a trained topic model")
    if "d2v" in families and docvec_model is None:
        raise DataError("feature family 'd2v' enabled without a trained doc2vec model")
    if vocab is None or pos_vocab is None or head_vocab is None:
        built = build_vocabularies(docs, min_count)
        vocab = vocab or built[0]
        pos_vocab = pos_vocab or built[1]
        head_vocab = head_vocab or built[2]

    space = FeatureSpace(feature_names(
        families, vocab, pos_vocab, head_vocab,
        topic_model.n_topics if topic_model else 0, docvec_model.dim if docvec_model else 0))

    sentences = list(_sentences(docs))
    n = len(sentences)
    blocks = {}
    if "lda" in families or "d2v" in families:
        ids = word_id_docs(docs, vocab)
        if "lda" in families:
            blocks["lda"] = infer_topics(ids, topic_model, lda_infer_iters, seed)
        if "d2v" in families:
            blocks["d2v"] = infer_docvecs(ids, docvec_model)
    headings = heading_token_lists(docs) if "head" in families else None
    positions = []
    for doc in docs:
        positions += [position_feature(s.index, len(doc)) for s in doc.sentences]

    sizes = {"bow": len(vocab), "pos": len(pos_vocab), "lda": topic_model.n_topics if topic_model else 0,
             "d2v": docvec_model.dim if docvec_model else 0, "head": len(head_vocab), "loc": 1, "len": 2}
    offsets = {}
    off = 0
    for fam in families:
        offsets[fam] = off
        off += sizes[fam]

    vectors = []
    for i, s in enumerate(sentences):
        parts = []
        for fam in families:
            o = offsets[fam]
            if fam == "bow":
                parts.append(bow_features(s.tokens, vocab).shifted(o))
            elif fam == "pos":
                parts.append(pos_features(s.tokens, pos_vocab).shifted(o))
            elif fam in ("lda", "d2v"):
                parts.append(SparseVector.from_dense(blocks[fam][i], o))
            elif fam == "head":
                parts.append(heading_features(headings[i], head_vocab).shifted(o))
            elif fam == "loc":
                parts.append(SparseVector([o], [positions[i]]))
            elif fam == "len":
                parts.append(SparseVector([o, o + 1], list(length_features(s))))
        vectors.append(SparseVector.concat(parts))
    assert len(vectors) == n
    return space, vectors


class SectionFeaturizer(BaseEstimator, TransformerMixin):
    """Learns vocabularies and the LDA / doc2vec sub-models, then emits sparse sentence rows.

    ``transform`` returns one CSR matrix with a row per sentence (documents
    concatenated in order); ``transform_documents`` splits it per document.
    """

    def __init__(self, families=FAMILIES, min_count=1, lda_topics=40, lda_alpha=None, lda_beta=0.01,
                 lda_iters=500, lda_infer_iters=50, d2v_dim=40, d2v_negatives=5, d2v_epochs=20, seed=0):
        self.families = families
        self.min_count = min_count
        self.lda_topics = lda_topics
        self.lda_alpha = lda_alpha
        self.lda_beta = lda_beta
        self.lda_iters = lda_iters
        self.lda_infer_iters = lda_infer_iters
        self.d2v_dim = d2v_dim
        self.d2v_negatives = d2v_negatives
        self.d2v_epochs = d2v_epochs
        self.seed = seed

    def fit(self, X, y=None):
        docs = check_documents(X, tokenized=True)
        families = _check_families(self.families)
        self.vocabulary_, self.pos_vocabulary_, self.heading_vocabulary_ = build_vocabularies(docs, self.min_count)
        self.topic_model_ = None
        self.docvec_model_ = None
        if "lda" in families or "d2v" in families:
            ids = word_id_docs(docs, self.vocabulary_)
            if "lda" in families:
                self.topic_model_ = train_lda(ids, len(self.vocabulary_), self.lda_topics, self.lda_alpha,
                                              self.lda_beta, self.lda_iters, self.seed,
                                              vocabulary=self.vocabulary_.words)
            if "d2v" in families:
                self.docvec_model_ = train_doc2vec(ids, len(self.vocabulary_), self.d2v_dim,
                                                   self.d2v_negatives, self.d2v_epochs, self.seed)
        self.families_ = families
        self.space_ = FeatureSpace(feature_names(
            families, self.vocabulary_, self.pos_vocabulary_, self.heading_vocabulary_,
            self.lda_topics if self.topic_model_ else 0, self.d2v_dim if self.docvec_model_ else 0))
        return self

    def transform_vectors(self, X) -> list[SparseVector]:
        check_is_fitted(self, "space_")
        space, vectors = assemble_features(
            X, self.families_, vocab=self.vocabulary_, pos_vocab=self.pos_vocabulary_,
            head_vocab=self.heading_vocabulary_, topic_model=self.topic_model_,
            docvec_model=self.docvec_model_, lda_infer_iters=self.lda_infer_iters, seed=self.seed)
        assert space == self.space_
        return vectors

    def transform(self, X):
        return to_csr(self.transform_vectors(X), len(self.space_))

    def transform_documents(self, X) -> list:
        docs = check_documents(X, tokenized=True)
        mat = self.transform(docs)
        out = []
        start = 0
        for doc in docs:
            out.append(mat[start:start + len(doc)])
            start += len(doc)
        return out

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "space_")
        return np.array(self.space_.names, dtype=object)
