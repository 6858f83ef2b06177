"""Trained end-to-end labelers (featurizer + IG selection + model) and their model files."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from . import serialization
from .classic.crf import CrfModel, CrfTemplate, LinearChainCRF, viterbi_decode, crf_score_table
from .classic.linear import LinearModel, LogisticRegressionClassifier, LinearSVMClassifier, argmax_label
from .corpus import LABELS
from .errors import DataError
from .features.assemble import SectionFeaturizer
from .features.doc2vec import DocVectorModel
from .features.lda import TopicModel
from .features.sparse import FeatureSpace, Vocabulary
from .neural.slstm import SlstmModel, predict_proba_document, train_slstm, variant_config
from .selection import InformationGainSelector
from .validation import check_documents, document_labels

CLASSIC_KINDS = ("lr", "svm", "crf")
NEURAL_KINDS = ("slstm", "clstm", "blstm")


class ClassicLabeler:
    """A fitted featurizer, the kept feature indices and a linear or CRF model."""

    def __init__(self, kind, featurizer: SectionFeaturizer, kept: np.ndarray, model):
        self.kind = kind
        self.featurizer = featurizer
        self.kept = np.asarray(kept, dtype=np.int64)
        self.model = model

    @classmethod
    def fit(cls, docs, kind, feature_params=None, threshold=0.009, model_params=None, seed=0):
        docs = check_documents(docs, tokenized=True, labeled=True)
        if kind not in CLASSIC_KINDS:
            raise DataError(f"unknown classic model {kind!r}")
        feat = SectionFeaturizer(**{"seed": seed, **(feature_params or {})}).fit(docs)
        Xd = feat.transform_documents(docs)
        y = [document_labels(d) for d in docs]
        sel = InformationGainSelector(threshold).fit(sp.vstack(Xd), np.concatenate(y))
        kept = np.flatnonzero(sel.get_support())
        if kept.size == 0:
            raise DataError(f"IG threshold {threshold} removed every feature")
        Xd = [x[:, kept] for x in Xd]
        params = {"seed": seed, **(model_params or {})}
        if kind == "crf":
            est = LinearChainCRF(**params).fit(Xd, y)
        elif kind == "lr":
            est = LogisticRegressionClassifier(**params).fit(sp.vstack(Xd), np.concatenate(y))
        else:
            est = LinearSVMClassifier(**params).fit(sp.vstack(Xd), np.concatenate(y))
        names = tuple(feat.space_.names[i] for i in kept)
        est.model_.feature_names = names
        return cls(kind, feat, kept, est.model_)

    @property
    def feature_names(self):
        return tuple(self.featurizer.space_.names[i] for i in self.kept)

    def predict_proba_documents(self, docs):
        if self.kind == "crf":
            raise DataError("CRF labelers return label sequences only")
        out = []
        for X in self.featurizer.transform_documents(docs):
            scores = self.model.decision(X[:, self.kept])
            z = np.exp(scores - scores.max(axis=1, keepdims=True))
            out.append(z / z.sum(axis=1, keepdims=True))
        return out

    def predict_documents(self, docs) -> list[np.ndarray]:
        docs = check_documents(docs, tokenized=True)
        out = []
        for X in self.featurizer.transform_documents(docs):
            X = X[:, self.kept]
            if self.kind == "crf":
                state, trans = crf_score_table(self.model, X)
                out.append(np.array(viterbi_decode(state, trans)[0], dtype=np.int64))
            else:
                out.append(argmax_label(self.model.decision(X)))
        return out

    def save(self, path):
        f = self.featurizer
        meta = {
            "kind": self.kind,
            "featurizer": {k: (list(v) if isinstance(v, tuple) else v) for k, v in f.get_params().items()},
            "families": list(f.families_),
            "vocab": list(f.vocabulary_.words), "vocab_counts": list(f.vocabulary_.counts),
            "pos_vocab": list(f.pos_vocabulary_.words), "pos_counts": list(f.pos_vocabulary_.counts),
            "head_vocab": list(f.heading_vocabulary_.words), "head_counts": list(f.heading_vocabulary_.counts),
            "features": list(f.space_.names),
        }
        sections = {"kept": self.kept}
        if f.topic_model_ is not None:
            tm = f.topic_model_
            meta["lda"] = {"n_topics": tm.n_topics, "alpha": tm.alpha, "beta": tm.beta}
            sections["lda_topic_word"] = tm.topic_word_counts
            sections["lda_topic_totals"] = tm.topic_totals
        if f.docvec_model_ is not None:
            dm = f.docvec_model_
            meta["d2v"] = {"dim": dm.dim, "infer_steps": dm.infer_steps, "infer_lr": dm.infer_lr,
                           "negatives": dm.negatives, "seed": dm.seed}
            sections["d2v_vectors"] = dm.word_vectors
            sections["d2v_counts"] = dm.word_counts
        if self.kind == "crf":
            meta["offsets"] = list(self.model.template.offsets)
            meta["model_config"] = self.model.config
            sections["crf_state"] = self.model.state
            sections["crf_transitions"] = self.model.transitions
        else:
            meta["model_kind"] = self.model.kind
            meta["model_config"] = self.model.config
            sections["linear_weights"] = self.model.weights
        serialization.save(path, "classic-pipeline", meta, sections)

    @classmethod
    def from_container(cls, meta, secs):
        params = dict(meta["featurizer"])
        params["families"] = tuple(params["families"])
        f = SectionFeaturizer(**params)
        f.families_ = tuple(meta["families"])
        f.vocabulary_ = Vocabulary(tuple(meta["vocab"]), tuple(meta["vocab_counts"]))
        f.pos_vocabulary_ = Vocabulary(tuple(meta["pos_vocab"]), tuple(meta["pos_counts"]))
        f.heading_vocabulary_ = Vocabulary(tuple(meta["head_vocab"]), tuple(meta["head_counts"]))
        f.topic_model_ = None
        f.docvec_model_ = None
        if "lda" in meta:
            lda = meta["lda"]
            f.topic_model_ = TopicModel(lda["n_topics"], lda["alpha"], lda["beta"], secs["lda_topic_word"],
                                        secs["lda_topic_totals"], f.vocabulary_.words)
        if "d2v" in meta:
            d = meta["d2v"]
            f.docvec_model_ = DocVectorModel(d["dim"], secs["d2v_vectors"], secs["d2v_counts"], d["infer_steps"],
                                             d["infer_lr"], d["negatives"], d["seed"])
        f.space_ = FeatureSpace(meta["features"])
        kept = secs["kept"]
        names = tuple(f.space_.names[i] for i in kept)
        if meta["kind"] == "crf":
            model = CrfModel(secs["crf_state"], secs["crf_transitions"], CrfTemplate(tuple(meta["offsets"])),
                             names, meta["model_config"])
        else:
            model = LinearModel(meta["model_kind"], secs["linear_weights"], names, meta["model_config"])
        return cls(meta["kind"], f, kept, model)


class NeuralLabeler:
    def __init__(self, kind, model: SlstmModel):
        self.kind = kind
        self.model = model

    @classmethod
    def fit(cls, docs, kind, params=None, seed=0, embeddings=None, log_path=None, embedding_epochs=5):
        params = dict(params or {})
        max_epochs = params.pop("epochs", None)
        embedding_epochs = params.pop("embedding_epochs", embedding_epochs)
        config = variant_config(kind, **params)
        model, _ = train_slstm(docs, config, seed, embeddings=embeddings, log_path=log_path,
                               embedding_epochs=embedding_epochs, max_epochs=max_epochs)
        return cls(kind, model)

    def predict_proba_documents(self, docs):
        return [predict_proba_document(self.model, d) for d in check_documents(docs, tokenized=True)]

    def predict_documents(self, docs):
        return [np.argmax(p, axis=1) for p in self.predict_proba_documents(docs)]

    def save(self, path):
        self.model.save(path, {"variant": self.kind})


def load_labeler(path):
    kind, meta, secs = serialization.load(path)
    if kind == "classic-pipeline":
        return ClassicLabeler.from_container(meta, secs)
    if kind == "slstm":
        return NeuralLabeler(meta.get("variant", "slstm"), SlstmModel.load(path))
    raise DataError(f"{path} holds a {kind!r} model, not a sentence labeler")


def labels_to_enum(arr):
    return [LABELS[int(i)] for i in arr]
