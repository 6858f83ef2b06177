"""Synthetic labeled corpora with a Markov label grammar and label-specific vocabularies.

Every synthetic word is two CJK characters: a "head" character followed by a
"tail" character, drawn from disjoint blocks.  Maximum matching against the
matching lexicon therefore recovers the generated words exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .corpus import LABELS, N_LABELS, Corpus, Document, SectionLabel, Sentence, TARGET_LABELS, assign_heading_text
from .errors import DataError
from .segmentation import Lexicon, segment_words

L = SectionLabel

DEFAULT_GRAMMAR = {
    L.PRE: {L.PRE: 0.6, L.SUBJECT: 0.4},
    L.SUBJECT: {L.SUBJECT: 0.7, L.METHOD: 0.3},
    L.METHOD: {L.METHOD: 0.9, L.RESULT: 0.1},
    L.RESULT: {L.RESULT: 0.8, L.AFTER: 0.16, L.OTHER: 0.04},
    L.AFTER: {L.AFTER: 0.93, L.OTHER: 0.07},
    L.OTHER: {L.OTHER: 0.5, L.AFTER: 0.5},
}

_HEAD_BASE = 0x4E00
_TAIL_BASE = 0x6000
_BLOCK = 160
_TAGS = ("n", "v", "a", "d", "vn", "nz")


@dataclass(frozen=True)
class SyntheticConfig:
    signal_words: tuple[int, ...] = (12, 12, 12, 12, 12, 12)
    noise_words: int = 200
    heading_words: int = 3
    signal_per_sentence: tuple[int, int] = (1, 3)
    noise_per_sentence: tuple[int, int] = (3, 8)
    ambiguity: float = 0.0
    heading_prob: float = 0.5
    doc_length: tuple[int, int] = (20, 60)
    paragraph_break: float = 0.35
    vocab_seed: int = 0

    def __post_init__(self):
        if len(self.signal_words) != N_LABELS:
            raise DataError("signal_words needs one pool size per label")
        if not 0.0 <= self.ambiguity <= 1.0:
            raise DataError("ambiguity must be within [0, 1]")
        if self.doc_length[0] < 1 or self.doc_length[1] < self.doc_length[0]:
            raise DataError("invalid doc_length range")


@dataclass(frozen=True)
class SyntheticVocabulary:
    signal: dict
    noise: tuple[str, ...]
    headings: dict
    tags: dict = field(repr=False)

    def lexicon(self) -> Lexicon:
        rows = []
        for word, tags in sorted(self.tags.items()):
            rows.extend((word, pos, freq) for pos, freq in tags)
        return Lexicon.from_words(rows)

    @property
    def planted(self) -> tuple[str, ...]:
        return tuple(w for lab in LABELS for w in self.signal[lab])


def build_vocabulary(config: SyntheticConfig = SyntheticConfig()) -> SyntheticVocabulary:
    rng = np.random.default_rng([config.vocab_seed, 7919])
    need = sum(config.signal_words) + config.noise_words + N_LABELS * config.heading_words
    if need > _BLOCK * _BLOCK:
        raise DataError("synthetic vocabulary too large")
    pairs = rng.choice(_BLOCK * _BLOCK, size=need, replace=False)
    words = [chr(_HEAD_BASE + p // _BLOCK) + chr(_TAIL_BASE + p % _BLOCK) for p in pairs]
    pos = 0
    signal = {}
    for lab, size in zip(LABELS, config.signal_words):
        signal[lab] = tuple(words[pos:pos + size])
        pos += size
    noise = tuple(words[pos:pos + config.noise_words])
    pos += config.noise_words
    headings = {}
    for lab in LABELS:
        headings[lab] = tuple(words[pos:pos + config.heading_words])
        pos += config.heading_words
    tags = {}
    for w in words:
        main = _TAGS[rng.integers(len(_TAGS))]
        entries = [(main, int(rng.integers(50, 1000)))]
        if rng.random() < 0.1:
            other = _TAGS[(_TAGS.index(main) + 1) % len(_TAGS)]
            entries.append((other, int(rng.integers(1, 50))))
        tags[w] = tuple(entries)
    return SyntheticVocabulary(signal, noise, headings, tags)


def synthetic_lexicon(config: SyntheticConfig = SyntheticConfig()) -> Lexicon:
    return build_vocabulary(config).lexicon()


def transition_matrix(grammar) -> np.ndarray:
    """Normalise a grammar (6x6 array or nested label mapping) to a checked matrix."""
    if isinstance(grammar, Mapping):
        mat = np.zeros((N_LABELS, N_LABELS))
        for src, row in grammar.items():
            for dst, p in row.items():
                mat[SectionLabel.parse(src), SectionLabel.parse(dst)] = p
    else:
        mat = np.asarray(grammar, dtype=np.float64)
    if mat.shape != (N_LABELS, N_LABELS):
        raise DataError(f"transition table must be {N_LABELS}x{N_LABELS}")
    if np.any(mat < 0) or not np.all(np.isfinite(mat)):
        raise DataError("transition probabilities must be finite and non-negative")
    if not np.allclose(mat.sum(axis=1), 1.0, atol=1e-9):
        raise DataError("each transition row must sum to 1")
    return mat


def _sentence(rng, vocab, config, label, ambiguous):
    lo, hi = config.signal_per_sentence
    n_sig = int(rng.integers(lo, hi + 1))
    n_noise = int(rng.integers(config.noise_per_sentence[0], config.noise_per_sentence[1] + 1))
    pool = vocab.signal[label]
    if ambiguous or not pool:
        n_noise += n_sig
        n_sig = 0
    words = [pool[i] for i in rng.integers(len(pool), size=n_sig)] if n_sig else []
    words += [vocab.noise[i] for i in rng.integers(len(vocab.noise), size=n_noise)]
    words = [words[i] for i in rng.permutation(len(words))]
    if len(words) > 2 and rng.random() < 0.5:
        words.insert(int(rng.integers(1, len(words))), "，")
    return "".join(words) + "。"


def _heading_label(block_label, seen_target):
    if block_label is L.AFTER:
        return L.AFTER
    return L.OTHER if seen_target else L.PRE


def generate_synthetic_corpus(seed: int, n_docs: int, label_grammar=None,
                              config: SyntheticConfig | None = None, tokenize: bool = True) -> Corpus:
    """Deterministic labeled corpus: label sequences from a Markov chain starting at Pre."""
    config = config or SyntheticConfig()
    trans = transition_matrix(DEFAULT_GRAMMAR if label_grammar is None else label_grammar)
    if n_docs < 0:
        raise DataError("n_docs must be non-negative")
    vocab = build_vocabulary(config)
    lex = vocab.lexicon() if tokenize else None
    rng = np.random.default_rng([seed, 104729])
    docs = []
    for d in range(n_docs):
        length = int(rng.integers(config.doc_length[0], config.doc_length[1] + 1))
        labels = [L.PRE]
        for _ in range(length - 1):
            labels.append(LABELS[int(rng.choice(N_LABELS, p=trans[labels[-1]]))])
        with_headings = rng.random() < config.heading_prob
        # (text, label, is_heading, paragraph)
        rows = []
        par = -1
        seen_target = False
        prev = None
        for lab in labels:
            new_block = lab is not prev
            if new_block and with_headings and lab in (L.SUBJECT, L.METHOD, L.RESULT, L.AFTER):
                pool = vocab.headings[lab]
                k = min(2, len(pool))
                picks = rng.choice(len(pool), size=k, replace=False)
                par += 1
                rows.append(("".join(pool[i] for i in picks), _heading_label(lab, seen_target), True, par))
                par += 1
            elif new_block or rng.random() < config.paragraph_break or par < 0:
                par += 1
            elif rows and rows[-1][2]:
                par += 1
            ambiguous = rng.random() < config.ambiguity
            rows.append((_sentence(rng, vocab, config, lab, ambiguous), lab, False, par))
            seen_target = seen_target or lab in TARGET_LABELS
            prev = lab
        sents = [
            Sentence(text, i, p, is_heading=h, gold_label=lab,
                     tokens=tuple(segment_words(text, lex)) if lex is not None else None)
            for i, (text, lab, h, p) in enumerate(rows)
        ]
        docs.append(Document(f"syn{seed}-{d:04d}", f"合成文献{d}", tuple(assign_heading_text(sents)),
                             {"synthetic": True, "seed": seed}))
    return Corpus(tuple(docs), labeled=True)
