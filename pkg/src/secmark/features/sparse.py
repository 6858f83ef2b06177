from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from ..errors import DataError


class SparseVector:
    """Sorted (dimension, value) pairs with no explicit zeros."""

    __slots__ = ("indices", "values")

    def __init__(self, indices=(), values=()):
        idx = np.asarray(indices, dtype=np.int64)
        val = np.asarray(values, dtype=np.float64)
        if idx.shape != val.shape or idx.ndim != 1:
            raise DataError("indices and values must be aligned 1-d sequences")
        if not np.all(np.isfinite(val)):
            raise DataError("sparse vector values must be finite")
        keep = val != 0
        idx, val = idx[keep], val[keep]
        order = np.argsort(idx, kind="stable")
        idx, val = idx[order], val[order]
        if idx.size > 1 and np.any(np.diff(idx) == 0):
            raise DataError("duplicate dimension in sparse vector")
        self.indices = idx
        self.values = val

    @classmethod
    def _trusted(cls, indices, values) -> "SparseVector":
        # caller guarantees sorted unique dims, finite non-zero values
        self = cls.__new__(cls)
        self.indices = indices
        self.values = values
        return self

    @classmethod
    def from_counts(cls, counts: Mapping[int, float]) -> "SparseVector":
        keys = sorted(k for k, v in counts.items() if v)
        return cls._trusted(np.array(keys, dtype=np.int64), np.array([counts[k] for k in keys], dtype=np.float64))

    @classmethod
    def from_dense(cls, dense, offset=0) -> "SparseVector":
        dense = np.asarray(dense, dtype=np.float64)
        if not np.all(np.isfinite(dense)):
            raise DataError("sparse vector values must be finite")
        nz = np.flatnonzero(dense)
        return cls._trusted(nz + offset, dense[nz])

    def __len__(self):
        return self.indices.size

    def __eq__(self, other):
        return (isinstance(other, SparseVector) and np.array_equal(self.indices, other.indices)
                and np.array_equal(self.values, other.values))

    def __repr__(self):
        pairs = ", ".join(f"{i}:{v:g}" for i, v in zip(self.indices, self.values))
        return f"SparseVector({{{pairs}}})"

    def shifted(self, offset: int) -> "SparseVector":
        return SparseVector._trusted(self.indices + offset, self.values)

    def to_dict(self, names: Sequence[str] | None = None) -> dict:
        if names is None:
            return {int(i): float(v) for i, v in zip(self.indices, self.values)}
        return {names[i]: float(v) for i, v in zip(self.indices, self.values)}

    def to_dense(self, n_dims: int) -> np.ndarray:
        out = np.zeros(n_dims)
        if self.indices.size and self.indices[-1] >= n_dims:
            raise DataError(f"dimension {self.indices[-1]} outside a {n_dims}-dim space")
        out[self.indices] = self.values
        return out

    @staticmethod
    def concat(parts: Iterable["SparseVector"]) -> "SparseVector":
        parts = list(parts)
        if not parts:
            return SparseVector()
        # parts must occupy increasing, disjoint dimension ranges
        return SparseVector._trusted(np.concatenate([p.indices for p in parts]),
                                     np.concatenate([p.values for p in parts]))


def to_csr(vectors: Sequence[SparseVector], n_dims: int) -> sp.csr_matrix:
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(v) for v in vectors])
    if vectors:
        indices = np.concatenate([v.indices for v in vectors])
        data = np.concatenate([v.values for v in vectors])
    else:
        indices = np.zeros(0, dtype=np.int64)
        data = np.zeros(0)
    if indices.size and indices.max() >= n_dims:
        raise DataError(f"dimension {indices.max()} outside a {n_dims}-dim space")
    return sp.csr_matrix((data, indices, indptr), shape=(len(vectors), n_dims))


def from_csr(matrix) -> list[SparseVector]:
    m = sp.csr_matrix(matrix)
    m.sort_indices()
    return [SparseVector(m.indices[m.indptr[i]:m.indptr[i + 1]], m.data[m.indptr[i]:m.indptr[i + 1]])
            for i in range(m.shape[0])]


@dataclass(frozen=True)
class Vocabulary:
    words: tuple[str, ...]
    counts: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "_index", {w: i for i, w in enumerate(self.words)})
        if len(self._index) != len(self.words):
            raise DataError("vocabulary words must be unique")

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self._index

    def get(self, word, default=None):
        return self._index.get(word, default)

    def __getitem__(self, word):
        return self._index[word]


def build_vocabulary(token_lists: Iterable[Iterable[str]], min_count: int = 1) -> Vocabulary:
    if min_count < 1:
        raise DataError("min_count must be >= 1")
    freq = Counter()
    for toks in token_lists:
        freq.update(toks)
    kept = sorted((w for w, c in freq.items() if c >= min_count), key=lambda w: (-freq[w], w))
    return Vocabulary(tuple(kept), tuple(freq[w] for w in kept))


class FeatureSpace:
    """Ordered, namespaced feature names with the inverse index."""

    def __init__(self, names: Iterable[str]):
        self.names = tuple(names)
        self.index = {n: i for i, n in enumerate(self.names)}
        if len(self.index) != len(self.names):
            raise DataError("feature names must be unique")

    def __len__(self):
        return len(self.names)

    def __eq__(self, other):
        return isinstance(other, FeatureSpace) and self.names == other.names

    def __repr__(self):
        return f"FeatureSpace({len(self.names)} dims)"

    def family_slices(self) -> dict[str, slice]:
        out = {}
        for i, name in enumerate(self.names):
            fam = name.split(":", 1)[0]
            if fam in out:
                out[fam] = slice(out[fam].start, i + 1)
            else:
                out[fam] = slice(i, i + 1)
        return out

    def save_text(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for name in self.names:
                fh.write(name + "\n")

    @classmethod
    def load_text(cls, path) -> "FeatureSpace":
        with open(path, encoding="utf-8") as fh:
            return cls(line.rstrip("\n") for line in fh if line.rstrip("\n"))
