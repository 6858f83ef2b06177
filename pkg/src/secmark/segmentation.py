"""Dictionary-based Chinese word segmentation (bidirectional maximum matching) and POS tagging."""

from __future__ import annotations

import re
from dataclasses import replace
from importlib import resources
from typing import Iterable, Mapping, Sequence

from .corpus import Document, Token, detect_headings
from .errors import DataError

UNKNOWN_TAG = "x"
NUMBER_TAG = "m"
LATIN_TAG = "eng"

_RUN = re.compile(r"[0-9０-９]+(?:[.．][0-9０-９]+)?|[A-Za-zＡ-Ｚａ-ｚ]+")


def default_pos_inventory() -> tuple[str, ...]:
    text = resources.files("secmark").joinpath("data/pos_tags.txt").read_text(encoding="utf-8")
    return tuple(line.strip() for line in text.splitlines() if line.strip())


def load_pos_inventory(path) -> tuple[str, ...]:
    with open(path, encoding="utf-8") as fh:
        return tuple(line.strip() for line in fh if line.strip())


class Lexicon:
    """Immutable word -> [(pos, frequency)] map."""

    def __init__(self, entries: Mapping[str, Sequence[tuple[str, int]]] | None = None,
                 inventory: Iterable[str] | None = None):
        self.inventory = frozenset(inventory if inventory is not None else default_pos_inventory())
        merged: dict[str, dict[str, int]] = {}
        for word, pairs in (entries or {}).items():
            if not word:
                raise DataError("empty word in lexicon")
            for pos, freq in pairs:
                if pos not in self.inventory:
                    raise DataError(f"POS tag {pos!r} not in inventory")
                if freq < 0:
                    raise DataError(f"negative frequency for {word!r}")
                slot = merged.setdefault(word, {})
                slot[pos] = slot.get(pos, 0) + int(freq)
        self._entries = {w: tuple(sorted(d.items())) for w, d in merged.items()}
        self.max_word_len = max((len(w) for w in self._entries), default=0)
        self._best = {w: _best_tag(pairs) for w, pairs in self._entries.items()}

    @classmethod
    def from_words(cls, words: Iterable[tuple[str, str, int]], inventory=None) -> "Lexicon":
        entries: dict[str, list] = {}
        for word, pos, freq in words:
            entries.setdefault(word, []).append((pos, freq))
        return cls(entries, inventory)

    def __contains__(self, word):
        return word in self._entries

    def __len__(self):
        return len(self._entries)

    def __iter__(self):
        return iter(sorted(self._entries))

    def entries(self, word) -> tuple[tuple[str, int], ...]:
        return self._entries.get(word, ())

    def best_tag(self, word) -> str | None:
        return self._best.get(word)

    def frequency(self, word, pos) -> int:
        return dict(self._entries.get(word, ())).get(pos, 0)


def _best_tag(pairs):
    # highest frequency, ties -> lexicographically smallest tag
    return min(pairs, key=lambda p: (-p[1], p[0]))[0]


def load_lexicon(path, inventory=None) -> Lexicon:
    inv = frozenset(inventory if inventory is not None else default_pos_inventory())
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n\r")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"lexicon line {lineno}: expected word<TAB>pos<TAB>frequency")
            word, pos, freq = parts
            if pos not in inv:
                raise DataError(f"lexicon line {lineno}: unknown POS tag {pos!r}")
            try:
                count = int(freq)
            except ValueError:
                raise DataError(f"lexicon line {lineno}: frequency {freq!r} is not an integer") from None
            if count < 0:
                raise DataError(f"lexicon line {lineno}: negative frequency")
            rows.append((word, pos, count))
    return Lexicon.from_words(rows, inv)


def save_lexicon(lex: Lexicon, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for word in lex:
            for pos, freq in lex.entries(word):
                fh.write(f"{word}\t{pos}\t{freq}\n")


def forward_max_match(text: str, lex: Lexicon) -> list[str]:
    out = []
    i, n = 0, len(text)
    longest = max(lex.max_word_len, 1)
    while i < n:
        for size in range(min(longest, n - i), 0, -1):
            piece = text[i:i + size]
            if size == 1 or piece in lex:
                out.append(piece)
                i += size
                break
    return out


def backward_max_match(text: str, lex: Lexicon) -> list[str]:
    out = []
    j = len(text)
    longest = max(lex.max_word_len, 1)
    while j > 0:
        for size in range(min(longest, j), 0, -1):
            piece = text[j - size:j]
            if size == 1 or piece in lex:
                out.append(piece)
                j -= size
                break
    out.reverse()
    return out


def bidirectional_max_match(text: str, lex: Lexicon) -> list[str]:
    fwd = forward_max_match(text, lex)
    bwd = backward_max_match(text, lex)
    if fwd == bwd:
        return fwd
    key_f = (len(fwd), sum(len(w) == 1 for w in fwd))
    key_b = (len(bwd), sum(len(w) == 1 for w in bwd))
    return fwd if key_f < key_b else bwd


def _spans(text, chunk_runs):
    if not chunk_runs:
        return [(text, None)]
    out = []
    pos = 0
    for m in _RUN.finditer(text):
        if m.start() > pos:
            out.append((text[pos:m.start()], None))
        tag = LATIN_TAG if m.group()[0].isalpha() else NUMBER_TAG
        out.append((m.group(), tag))
        pos = m.end()
    if pos < len(text):
        out.append((text[pos:], None))
    return out


def segment_words(text: str, lex: Lexicon, chunk_runs: bool = True) -> list[Token]:
    """Segment ``text`` into tagged tokens; joined surfaces always equal ``text``.

    With ``chunk_runs`` digit runs and Latin-letter runs are kept whole
    (tagged ``m`` / ``eng`` unless the lexicon knows them) before matching.
    """
    if not text:
        raise DataError("cannot segment empty text")
    tokens = []
    for span, run_tag in _spans(text, chunk_runs):
        if run_tag is not None:
            tokens.append(Token(span, lex.best_tag(span) or run_tag))
        else:
            tokens.extend(pos_tag(bidirectional_max_match(span, lex), lex))
    return tokens


def pos_tag(surfaces: Iterable[str], lex: Lexicon) -> list[Token]:
    return [Token(s, lex.best_tag(s) or UNKNOWN_TAG) for s in surfaces]


def content_tokens(tokens: Sequence[Token]) -> list[Token]:
    """Tokens minus punctuation and whitespace (used for word counts and features)."""
    return [t for t in tokens if any(ch.isalnum() for ch in t.surface)]


def segment_document(doc: Document, lex: Lexicon, headings: bool = True) -> Document:
    """Tokenize every sentence; with ``headings`` re-run heading detection on content word counts."""
    sents = tuple(replace(s, tokens=tuple(segment_words(s.text, lex))) for s in doc.sentences)
    doc = replace(doc, sentences=sents)
    if headings:
        doc = detect_headings(doc, [len(content_tokens(s.tokens)) for s in sents])
    return doc
