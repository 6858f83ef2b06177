"""Word embedding tables: skip-gram pretraining and the plain-text exchange format."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..errors import DataError
from ..features.sparse import build_vocabulary
from ..sgns import sgns_train

PAD = "<pad>"
UNK = "<unk>"


@dataclass
class EmbeddingTable:
    """Row 0 is padding (kept at zero), row 1 stands for unknown words."""

    words: tuple[str, ...]
    vectors: np.ndarray
    trainable: bool = True

    def __post_init__(self):
        self.words = tuple(self.words)
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if len(self.words) < 2 or self.words[0] != PAD or self.words[1] != UNK:
            raise DataError(f"embedding vocabulary must start with {PAD}, {UNK}")
        if self.vectors.shape[0] != len(self.words) or self.vectors.ndim != 2:
            raise DataError("embedding rows do not match the vocabulary")
        if np.any(self.vectors[0] != 0):
            raise DataError("padding row must be zero")
        if not np.all(np.isfinite(self.vectors)):
            raise DataError("non-finite embedding value")
        self._index = {w: i for i, w in enumerate(self.words)}
        if len(self._index) != len(self.words):
            raise DataError("duplicate word in embedding table")

    @property
    def dim(self):
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.words)

    def index(self, word) -> int:
        return self._index.get(word, 1)

    def encode(self, words: Iterable[str], length: int | None = None) -> np.ndarray:
        ids = [self.index(w) for w in words]
        if length is None:
            return np.array(ids, dtype=np.int64)
        ids = ids[:length] + [0] * max(0, length - len(ids))
        return np.array(ids, dtype=np.int64)

    def vector(self, word) -> np.ndarray:
        return self.vectors[self.index(word)]


def skipgram_pairs(sentences: Sequence[np.ndarray], window: int):
    centers, contexts = [], []
    for ids in sentences:
        n = ids.size
        for off in range(1, window + 1):
            if off >= n:
                break
            centers += [ids[:-off], ids[off:]]
            contexts += [ids[off:], ids[:-off]]
    if not centers:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    return np.concatenate(centers), np.concatenate(contexts)


def train_word_embeddings(token_lists: Iterable[Sequence[str]], dim=200, window=5, negatives=5, epochs=5,
                          seed=0, min_count=1, lr=0.025) -> EmbeddingTable:
    """Skip-gram with negative sampling; input vectors become the table."""
    if dim < 2:
        raise DataError("embedding dimension must be >= 2")
    token_lists = [list(t) for t in token_lists]
    vocab = build_vocabulary(token_lists, min_count)
    if len(vocab) == 0:
        raise DataError("cannot train embeddings on an empty corpus")
    words = (PAD, UNK) + tuple(vocab.words)
    index = {w: i + 2 for i, w in enumerate(vocab.words)}
    sents = [np.array([index[w] for w in toks if w in index], dtype=np.int64) for toks in token_lists]
    centers, contexts = skipgram_pairs(sents, window)
    counts = np.zeros(len(words))
    counts[2:] = vocab.counts
    rng = np.random.default_rng([seed, 31337])
    if centers.size:
        w_in, _, _ = sgns_train(centers, contexts, len(words), len(words), dim, counts, negatives=negatives,
                                epochs=epochs, lr=lr, rng=rng)
    else:
        w_in = (rng.random((len(words), dim)) - 0.5) / dim
    w_in[0] = 0.0
    w_in[1] = 0.0
    return EmbeddingTable(words, w_in)


def save_embeddings(table: EmbeddingTable, path) -> None:
    """Text format: first line ``V E``, then ``word v1 ... vE`` (padding row omitted)."""
    rows = [(w, table.vectors[i]) for i, w in enumerate(table.words) if w != PAD]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{len(rows)} {table.dim}\n")
        for w, v in rows:
            if not w or any(ch.isspace() for ch in w):
                raise DataError(f"word {w!r} cannot be written to an embedding file")
            fh.write(w + " " + " ".join(repr(float(x)) for x in v) + "\n")


def load_embeddings(path) -> EmbeddingTable:
    with open(path, encoding="utf-8") as fh:
        head = fh.readline().split()
        if len(head) != 2:
            raise DataError("embedding file: first line must be 'V E'")
        try:
            n, dim = int(head[0]), int(head[1])
        except ValueError:
            raise DataError("embedding file: first line must be 'V E'") from None
        words, rows = [], []
        for lineno, line in enumerate(fh, 2):
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise DataError(f"embedding file line {lineno}: expected {dim} values")
            try:
                rows.append([float(x) for x in parts[1:]])
            except ValueError:
                raise DataError(f"embedding file line {lineno}: non-numeric value") from None
            words.append(parts[0])
    if len(words) != n:
        raise DataError(f"embedding file declares {n} words but has {len(words)}")
    vectors = np.array(rows, dtype=np.float64).reshape(len(rows), dim)
    if UNK in words:
        k = words.index(UNK)
        unk = vectors[k]
        words.pop(k)
        vectors = np.delete(vectors, k, axis=0)
    else:
        unk = np.zeros(dim)
    return EmbeddingTable((PAD, UNK, *words), np.vstack([np.zeros((1, dim)), unk[None, :], vectors]))
