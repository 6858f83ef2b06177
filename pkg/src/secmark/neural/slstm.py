"""Sentence-window BLSTM classifiers: BLSTM, CLSTM and SLSTM.

Each sentence is encoded by one shared BLSTM.  The classifier for sentence
``t`` concatenates the encodings of sentences ``t-window .. t+window``
(missing neighbours are zero vectors), optionally followed by a convolutional
encoding of the governing heading, then applies dropout, a dense layer and
softmax.  With ``window=0`` and no heading branch it is a plain BLSTM
classifier; ``window>0`` without headings is CLSTM.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, fields
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .. import serialization
from ..corpus import LABELS, N_LABELS, Document
from ..errors import ConfigError, DataError
from ..features.lexical import feature_words, governing_headings
from ..validation import check_documents, check_is_fitted, document_labels
from .embeddings import PAD, UNK, EmbeddingTable, train_word_embeddings
from .layers import LstmParams, blstm_encode, conv_maxpool_encode, init_lstm
from .optim import AdamState, adam_step
from .tensor import Tensor, concat, cross_entropy, dropout_mask, gather_rows, make_dropout_mask, matmul, add, reshape


@dataclass(frozen=True)
class SlstmConfig:
    window: int = 3
    hidden: int = 200
    heading_filters: int = 200
    kernel: int = 3
    sent_len: int = 100
    head_len: int = 5
    dropout: float = 0.2
    lr: float = 0.001
    batch: int = 128
    heading_branch: bool = True
    embed_dim: int = 200
    heading_embed_dim: int = 200
    max_epochs: int = 50
    patience: int = 5
    val_fraction: float = 0.1
    pooling: str = "final"
    freeze_embeddings: bool = False
    label_count: int = N_LABELS

    def __post_init__(self):
        if self.window < 0:
            raise ConfigError("window must be >= 0")
        if self.kernel > self.head_len:
            raise ConfigError(f"kernel {self.kernel} exceeds head_len {self.head_len}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")
        if min(self.hidden, self.heading_filters, self.kernel, self.sent_len, self.head_len, self.batch,
               self.embed_dim, self.heading_embed_dim) < 1:
            raise ConfigError("sizes must be positive")
        if self.lr <= 0:
            raise ConfigError("learning rate must be positive")
        if self.pooling not in ("final", "mean"):
            raise ConfigError(f"unknown pooling {self.pooling!r}")
        if self.label_count != N_LABELS:
            raise ConfigError(f"label_count is fixed at {N_LABELS}")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ConfigError("val_fraction must be in [0, 1)")

    @property
    def input_dim(self):
        return 2 * self.hidden * (2 * self.window + 1) + (self.heading_filters if self.heading_branch else 0)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown SLSTM settings: {sorted(unknown)}")
        return cls(**d)


VARIANTS = {
    "slstm": {"window": 3, "heading_branch": True},
    "clstm": {"window": 3, "heading_branch": False},
    "blstm": {"window": 0, "heading_branch": False},
}


def variant_config(name: str, **overrides) -> SlstmConfig:
    if name not in VARIANTS:
        raise ConfigError(f"unknown neural variant {name!r}; choose from {sorted(VARIANTS)}")
    return SlstmConfig(**{**VARIANTS[name], **overrides})


@dataclass
class EncodedDocument:
    ids: np.ndarray  # (n, sent_len)
    heading: np.ndarray  # (n, head_len)
    labels: np.ndarray | None = None

    def __len__(self):
        return self.ids.shape[0]


PARAM_ORDER = ("word_emb", "head_emb", "fwd_W_x", "fwd_W_h", "fwd_b", "bwd_W_x", "bwd_W_h", "bwd_b",
               "conv_W", "conv_b", "dense_W", "dense_b")


class SlstmModel:
    def __init__(self, config: SlstmConfig, params: dict, words: Sequence[str], heading_words: Sequence[str]):
        self.config = config
        self.params = params
        self.words = tuple(words)
        self.heading_words = tuple(heading_words)
        self._word_index = {w: i for i, w in enumerate(self.words)}
        self._head_index = {w: i for i, w in enumerate(self.heading_words)}
        self._check()

    def _check(self):
        c = self.config
        expect = {
            "word_emb": (len(self.words), c.embed_dim),
            "fwd_W_x": (c.embed_dim, 4 * c.hidden), "fwd_W_h": (c.hidden, 4 * c.hidden), "fwd_b": (4 * c.hidden,),
            "bwd_W_x": (c.embed_dim, 4 * c.hidden), "bwd_W_h": (c.hidden, 4 * c.hidden), "bwd_b": (4 * c.hidden,),
            "dense_W": (c.input_dim, N_LABELS), "dense_b": (N_LABELS,),
        }
        if c.heading_branch:
            expect.update({"head_emb": (len(self.heading_words), c.heading_embed_dim),
                           "conv_W": (c.kernel * c.heading_embed_dim, c.heading_filters),
                           "conv_b": (c.heading_filters,)})
        for name, shape in expect.items():
            if name not in self.params:
                raise DataError(f"SLSTM model is missing parameter {name}")
            if self.params[name].shape != shape:
                raise DataError(f"parameter {name}: shape {self.params[name].shape}, expected {shape}")
        extra = set(self.params) - set(expect)
        if extra:
            raise DataError(f"unexpected SLSTM parameters {sorted(extra)}")

    def encode_words(self, words, length):
        ids = [self._word_index.get(w, 1) for w in words][:length]
        return ids + [0] * (length - len(ids))

    def encode_document(self, doc: Document) -> EncodedDocument:
        c = self.config
        ids = np.array([self.encode_words(feature_words(s.tokens), c.sent_len) for s in doc.sentences],
                       dtype=np.int64).reshape(len(doc), c.sent_len)
        owners = governing_headings(doc.sentences)
        heading = np.zeros((len(doc), c.head_len), dtype=np.int64)
        for i, o in enumerate(owners):
            if o is None:
                continue
            hw = [self._head_index.get(w, 1) for w in feature_words(doc.sentences[o].tokens)][:c.head_len]
            heading[i, :len(hw)] = hw
        labels = document_labels(doc) if doc.is_labeled else None
        return EncodedDocument(ids, heading, labels)

    def save(self, path, extra_meta=None):
        meta = {"config": asdict(self.config), "words": list(self.words), "heading_words": list(self.heading_words)}
        if extra_meta:
            meta.update(extra_meta)
        serialization.save(path, "slstm", meta, self.params)

    @classmethod
    def load(cls, path):
        _, meta, secs = serialization.load(path, "slstm")
        return cls(SlstmConfig.from_dict(meta["config"]), secs, meta["words"], meta["heading_words"])

    def copy(self):
        return SlstmModel(self.config, {k: v.copy() for k, v in self.params.items()}, self.words, self.heading_words)


def _glorot(rng, shape):
    limit = np.sqrt(6.0 / (shape[0] + shape[1]))
    return rng.uniform(-limit, limit, shape)


def build_model(config: SlstmConfig, embeddings: EmbeddingTable, heading_words: Sequence[str] = (),
                seed=0) -> SlstmModel:
    if embeddings.dim != config.embed_dim:
        raise ConfigError(f"embedding dimension {embeddings.dim} differs from embed_dim {config.embed_dim}")
    rng = np.random.default_rng([0 if seed is None else seed, 2718])
    params = {"word_emb": embeddings.vectors.copy()}
    params["word_emb"][0] = 0.0
    for prefix in ("fwd", "bwd"):
        for k, v in init_lstm(rng, config.embed_dim, config.hidden).items():
            params[f"{prefix}_{k}"] = v
    head_vocab = (PAD, UNK) + tuple(w for w in heading_words if w not in (PAD, UNK))
    if config.heading_branch:
        emb = rng.uniform(-0.1, 0.1, (len(head_vocab), config.heading_embed_dim))
        emb[0] = 0.0
        params["head_emb"] = emb
        params["conv_W"] = _glorot(rng, (config.kernel * config.heading_embed_dim, config.heading_filters))
        params["conv_b"] = np.zeros(config.heading_filters)
    params["dense_W"] = _glorot(rng, (config.input_dim, N_LABELS))
    params["dense_b"] = np.zeros(N_LABELS)
    return SlstmModel(config, params, embeddings.words, head_vocab)


def _batch_logits(model: SlstmModel, tensors: dict, docs: Sequence[EncodedDocument], targets, dropout_seed=None):
    """Logits (B, 6) for ``targets`` = [(doc index, sentence index)]."""
    c = model.config
    w = c.window
    needed = {}
    rows = []
    gather = np.empty((len(targets), 2 * w + 1), dtype=np.int64)
    for b, (d, t) in enumerate(targets):
        n = len(docs[d])
        if not 0 <= t < n:
            raise DataError(f"sentence index {t} outside a {n}-sentence document")
        for j, o in enumerate(range(-w, w + 1)):
            s = t + o
            if 0 <= s < n:
                key = (d, s)
                if key not in needed:
                    needed[key] = len(rows)
                    rows.append(docs[d].ids[s])
                gather[b, j] = needed[key]
            else:
                gather[b, j] = -1
    ids = np.array(rows, dtype=np.int64)
    fwd = LstmParams(tensors["fwd_W_x"], tensors["fwd_W_h"], tensors["fwd_b"])
    bwd = LstmParams(tensors["bwd_W_x"], tensors["bwd_W_h"], tensors["bwd_b"])
    enc = blstm_encode(ids, tensors["word_emb"], fwd, bwd, c.sent_len, c.pooling)  # (U, 2H)
    enc = concat([enc, np.zeros((1, 2 * c.hidden))], axis=0)
    gather[gather < 0] = len(rows)
    parts = [reshape(gather_rows(enc, gather), (len(targets), (2 * w + 1) * 2 * c.hidden))]
    if c.heading_branch:
        heads = np.array([docs[d].heading[t] for d, t in targets], dtype=np.int64)
        parts.append(conv_maxpool_encode(heads, tensors["head_emb"], tensors["conv_W"], tensors["conv_b"], c.kernel))
    x = concat(parts, axis=-1) if len(parts) > 1 else parts[0]
    if dropout_seed is not None and c.dropout > 0:
        x = dropout_mask(x, make_dropout_mask(x.shape, c.dropout, np.random.default_rng(dropout_seed)))
    return add(matmul(x, tensors["dense_W"]), tensors["dense_b"])


def _tensors(model, trainable=True):
    return {k: Tensor(v, requires_grad=trainable, name=k) for k, v in model.params.items()}


def _as_encoded(model, doc):
    if isinstance(doc, EncodedDocument):
        return doc
    if isinstance(doc, Document):
        if not doc.is_tokenized:
            raise DataError(f"document {doc.id} is not segmented")
        return model.encode_document(doc)
    raise DataError(f"expected a Document, got {type(doc).__name__}")


def slstm_forward(doc, t: int, model: SlstmModel) -> np.ndarray:
    """Label probabilities for sentence ``t`` (inference mode, no dropout)."""
    enc = _as_encoded(model, doc)
    logits = _batch_logits(model, _tensors(model, False), [enc], [(0, t)])
    z = logits.data[0] - logits.data[0].max()
    p = np.exp(z)
    return p / p.sum()


def slstm_loss_grad(model: SlstmModel, docs, targets, golds, dropout_seed=None):
    """(mean cross-entropy, gradient dict, probabilities) for a batch of targets.

    The padding rows of both embedding tables get no gradient.
    """
    if len(targets) == 0:
        raise DataError("empty batch")
    docs = [_as_encoded(model, d) for d in docs]
    tensors = _tensors(model)
    logits = _batch_logits(model, tensors, docs, targets, dropout_seed)
    loss, probs = cross_entropy(logits, golds)
    loss.backward()
    grads = {}
    for k, t in tensors.items():
        g = t.grad if t.grad is not None else np.zeros_like(t.data)
        if k in ("word_emb", "head_emb"):
            g[0] = 0.0
        grads[k] = g
    return float(loss.data), grads, probs


def predict_proba_document(model: SlstmModel, doc, chunk=256) -> np.ndarray:
    enc = _as_encoded(model, doc)
    tensors = _tensors(model, False)
    out = []
    for start in range(0, len(enc), chunk):
        targets = [(0, t) for t in range(start, min(len(enc), start + chunk))]
        logits = _batch_logits(model, tensors, [enc], targets).data
        z = logits - logits.max(axis=1, keepdims=True)
        p = np.exp(z)
        out.append(p / p.sum(axis=1, keepdims=True))
    return np.vstack(out)


def predict_slstm(model: SlstmModel, doc) -> list:
    probs = predict_proba_document(model, doc)
    return [(LABELS[int(np.argmax(p))], p) for p in probs]


def _macro_f1(gold, pred):
    scores = []
    for lab in np.unique(gold):
        tp = np.sum((pred == lab) & (gold == lab))
        p_n = np.sum(pred == lab)
        g_n = np.sum(gold == lab)
        p = tp / p_n if p_n else 0.0
        r = tp / g_n
        scores.append(2 * p * r / (p + r) if p + r > 0 else 0.0)
    return float(np.mean(scores)) if scores else 0.0


def _evaluate(model, docs, batch):
    tensors = _tensors(model, False)
    losses, golds, preds = [], [], []
    targets = [(d, t) for d in range(len(docs)) for t in range(len(docs[d]))]
    for start in range(0, len(targets), max(batch, 256)):
        chunk = targets[start:start + max(batch, 256)]
        gold = np.array([docs[d].labels[t] for d, t in chunk])
        logits = _batch_logits(model, tensors, docs, chunk)
        loss, probs = cross_entropy(logits, gold)
        losses.append(float(loss.data) * len(chunk))
        golds.append(gold)
        preds.append(np.argmax(probs, axis=1))
    gold, pred = np.concatenate(golds), np.concatenate(preds)
    return sum(losses) / gold.size, _macro_f1(gold, pred)


def train_slstm(corpus, config: SlstmConfig = SlstmConfig(), seed=0, embeddings: EmbeddingTable | None = None,
                log_path=None, embedding_epochs=5, max_epochs=None, validation=None):
    """Mini-batch Adam training with early stopping on validation macro-F1.

    Returns (best model, log rows ``(epoch, split, loss, macro_f1)``).  A
    fraction ``config.val_fraction`` of the documents is held out unless
    ``validation`` documents are given.  Without any validation documents the
    final epoch is returned.
    """
    docs = check_documents(corpus, tokenized=True, labeled=True)
    seed = 0 if seed is None else seed
    rng = np.random.default_rng([seed, 1618])
    if validation is None and config.val_fraction > 0 and len(docs) >= 2:
        order = rng.permutation(len(docs))
        n_val = max(1, int(round(config.val_fraction * len(docs))))
        val_docs = [docs[i] for i in sorted(order[:n_val])]
        train_docs = [docs[i] for i in sorted(order[n_val:])]
    else:
        train_docs = docs
        val_docs = check_documents(validation, tokenized=True, labeled=True) if validation else []
    if embeddings is None:
        embeddings = train_word_embeddings((feature_words(s.tokens) for d in train_docs for s in d.sentences),
                                           dim=config.embed_dim, epochs=embedding_epochs, seed=seed)
    heading_words = sorted({w for d in train_docs for s in d.sentences if s.is_heading
                            for w in feature_words(s.tokens)})
    model = build_model(config, embeddings, heading_words, seed)
    train_enc = [model.encode_document(d) for d in train_docs]
    val_enc = [model.encode_document(d) for d in val_docs]
    trainable = {k: v for k, v in model.params.items() if not (k == "word_emb" and config.freeze_embeddings)}
    state = AdamState()
    epochs = config.max_epochs if max_epochs is None else max_epochs
    log = []
    best, best_f1, stale = model.copy(), -1.0, 0
    step = 0
    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(train_enc))
        targets = [(int(d), t) for d in order for t in range(len(train_enc[d]))]
        losses, golds, preds = [], [], []
        for start in range(0, len(targets), config.batch):
            chunk = targets[start:start + config.batch]
            gold = np.array([train_enc[d].labels[t] for d, t in chunk])
            loss, grads, probs = slstm_loss_grad(model, train_enc, chunk, gold,
                                                 dropout_seed=[seed, epoch, step])
            adam_step(trainable, grads, state, lr=config.lr)
            step += 1
            losses.append(loss * len(chunk))
            golds.append(gold)
            preds.append(np.argmax(probs, axis=1))
        gold = np.concatenate(golds)
        log.append((epoch, "train", sum(losses) / gold.size, _macro_f1(gold, np.concatenate(preds))))
        if val_enc:
            v_loss, v_f1 = _evaluate(model, val_enc, config.batch)
            log.append((epoch, "val", v_loss, v_f1))
            if v_f1 > best_f1:
                best, best_f1, stale = model.copy(), v_f1, 0
            else:
                stale += 1
                if stale >= config.patience:
                    break
        else:
            best = model.copy()
    if log_path is not None:
        write_training_log(log, log_path)
    return best, log


def write_training_log(rows, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "split", "loss", "macro_f1"])
        for epoch, split, loss, f1 in rows:
            w.writerow([epoch, split, f"{loss:.6f}", f"{f1:.6f}"])


class SLSTMClassifier(BaseEstimator):
    """Estimator over documents; ``predict`` returns one label-index array per document."""

    def __init__(self, variant="slstm", window=None, hidden=200, heading_filters=200, kernel=3, sent_len=100,
                 head_len=5, dropout=0.2, lr=0.001, batch=128, embed_dim=200, heading_embed_dim=200,
                 max_epochs=50, patience=5, val_fraction=0.1, embedding_epochs=5, seed=0):
        self.variant = variant
        self.window = window
        self.hidden = hidden
        self.heading_filters = heading_filters
        self.kernel = kernel
        self.sent_len = sent_len
        self.head_len = head_len
        self.dropout = dropout
        self.lr = lr
        self.batch = batch
        self.embed_dim = embed_dim
        self.heading_embed_dim = heading_embed_dim
        self.max_epochs = max_epochs
        self.patience = patience
        self.val_fraction = val_fraction
        self.embedding_epochs = embedding_epochs
        self.seed = seed

    def config(self) -> SlstmConfig:
        over = dict(hidden=self.hidden, heading_filters=self.heading_filters, kernel=self.kernel,
                    sent_len=self.sent_len, head_len=self.head_len, dropout=self.dropout, lr=self.lr,
                    batch=self.batch, embed_dim=self.embed_dim, heading_embed_dim=self.heading_embed_dim,
                    max_epochs=self.max_epochs, patience=self.patience, val_fraction=self.val_fraction)
        if self.window is not None:
            over["window"] = self.window
        return variant_config(self.variant, **over)

    def fit(self, X, y=None):
        self.model_, self.log_ = train_slstm(X, self.config(), self.seed, embedding_epochs=self.embedding_epochs)
        return self

    def predict(self, X) -> list[np.ndarray]:
        check_is_fitted(self, "model_")
        return [np.argmax(predict_proba_document(self.model_, d), axis=1) for d in check_documents(X, tokenized=True)]

    def predict_proba(self, X) -> list[np.ndarray]:
        check_is_fitted(self, "model_")
        return [predict_proba_document(self.model_, d) for d in check_documents(X, tokenized=True)]
