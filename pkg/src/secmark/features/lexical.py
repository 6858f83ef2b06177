"""Count-valued sentence features: bag-of-words, word/POS pairs, headings, position, length."""

from __future__ import annotations

from collections import Counter
from typing import Sequence

from ..corpus import Sentence, Token
from ..errors import DataError
from ..segmentation import content_tokens
from .sparse import SparseVector, Vocabulary


def feature_words(tokens: Sequence[Token]) -> list[str]:
    """Surfaces used for BOW-style counting (whitespace dropped, punctuation kept)."""
    return [t.surface for t in tokens if t.surface.strip()]


def pos_pairs(tokens: Sequence[Token]) -> list[str]:
    return [f"{t.surface}/{t.pos}" for t in tokens if t.surface.strip()]


def _count(items, vocab: Vocabulary) -> SparseVector:
    counts = Counter()
    for item in items:
        idx = vocab.get(item)
        if idx is not None:
            counts[idx] += 1
    return SparseVector.from_counts(counts)


def bow_features(tokens: Sequence[Token | str], vocab: Vocabulary) -> SparseVector:
    words = [t if isinstance(t, str) else t.surface for t in tokens]
    return _count((w for w in words if w.strip()), vocab)


def pos_features(tokens: Sequence[Token | str], pos_vocab: Vocabulary) -> SparseVector:
    pairs = [t if isinstance(t, str) else f"{t.surface}/{t.pos}" for t in tokens]
    return _count(pairs, pos_vocab)


def heading_features(heading_tokens: Sequence[Token | str] | None, heading_vocab: Vocabulary) -> SparseVector:
    if not heading_tokens:
        return SparseVector()
    return bow_features(heading_tokens, heading_vocab)


def governing_headings(sentences: Sequence[Sentence]) -> list[int | None]:
    """Index of the heading sentence governing each sentence (itself for headings)."""
    out = []
    current = None
    for s in sentences:
        if s.is_heading:
            current = s.index
        out.append(current)
    return out


def position_feature(i: int, n: int) -> float:
    if n < 1 or i < 0 or i >= n:
        raise DataError(f"sentence position {i} outside a {n}-sentence document")
    return 0.0 if n == 1 else i / (n - 1)


def length_features(sentence: Sentence | str, tokens: Sequence[Token] | None = None) -> tuple[int, int]:
    text = sentence if isinstance(sentence, str) else sentence.text
    if tokens is None:
        tokens = sentence.tokens if isinstance(sentence, Sentence) else None
    if tokens is None:
        raise DataError("length_features needs a segmented sentence")
    return len(text), len(content_tokens(tokens))
