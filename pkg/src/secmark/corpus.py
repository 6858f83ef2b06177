"""Corpus model: labels, sentences, documents, and the JSONL corpus format."""

from __future__ import annotations

import enum
import numbers
import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from .errors import DataError


class SectionLabel(enum.IntEnum):
    PRE = 0
    SUBJECT = 1
    METHOD = 2
    RESULT = 3
    AFTER = 4
    OTHER = 5

    @property
    def slug(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, value) -> "SectionLabel":
        if isinstance(value, SectionLabel):
            return value
        if isinstance(value, numbers.Integral):
            try:
                return cls(int(value))
            except ValueError:
                raise DataError(f"unknown section label {value!r}") from None
        try:
            return cls[str(value).strip().upper()]
        except KeyError:
            raise DataError(f"unknown section label {value!r}") from None


LABELS = tuple(SectionLabel)
N_LABELS = len(LABELS)
TARGET_LABELS = (SectionLabel.SUBJECT, SectionLabel.METHOD, SectionLabel.RESULT)

SPLIT_MARKS = frozenset("。？！?!")
CLOSERS = frozenset("”’\"'）)】」』》")
# a heading may not end with any of these
TERMINAL_PUNCT = frozenset("。？！?!，,、；;：:.）)】\"")


@dataclass(frozen=True)
class Token:
    surface: str
    pos: str

    def __str__(self):
        return f"{self.surface}/{self.pos}"


@dataclass(frozen=True)
class Sentence:
    text: str
    index: int
    paragraph_index: int
    is_heading: bool = False
    gold_label: SectionLabel | None = None
    heading_text: str | None = None
    tokens: tuple[Token, ...] | None = None

    def __post_init__(self):
        if not self.text.strip():
            raise DataError(f"sentence {self.index} is empty")


@dataclass(frozen=True)
class Document:
    id: str
    title: str
    sentences: tuple[Sentence, ...]
    source_meta: dict | None = None

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        prev_par = -1
        for i, s in enumerate(self.sentences):
            if s.index != i:
                raise DataError(f"document {self.id}: sentence index {s.index} at position {i}")
            if s.paragraph_index < prev_par:
                raise DataError(f"document {self.id}: paragraph index decreases at sentence {i}")
            prev_par = s.paragraph_index

    def __len__(self):
        return len(self.sentences)

    @property
    def labels(self) -> list[SectionLabel | None]:
        return [s.gold_label for s in self.sentences]

    @property
    def is_labeled(self) -> bool:
        return all(s.gold_label is not None for s in self.sentences)

    @property
    def is_tokenized(self) -> bool:
        return all(s.tokens is not None for s in self.sentences)


@dataclass(frozen=True)
class Corpus:
    documents: tuple[Document, ...] = ()
    labeled: bool = field(default=False)

    def __post_init__(self):
        object.__setattr__(self, "documents", tuple(self.documents))
        seen = set()
        for doc in self.documents:
            if doc.id in seen:
                raise DataError(f"duplicate document id {doc.id!r}")
            seen.add(doc.id)
        if self.labeled and not all(d.is_labeled for d in self.documents):
            raise DataError("corpus marked labeled but some sentences lack gold labels")

    @classmethod
    def of(cls, documents: Iterable[Document]) -> "Corpus":
        docs = tuple(documents)
        return cls(docs, labeled=bool(docs) and all(d.is_labeled for d in docs))

    def __len__(self):
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)

    @property
    def n_sentences(self) -> int:
        return sum(len(d) for d in self.documents)


def _split_paragraph(text):
    pieces = []
    start = 0
    i = 0
    n = len(text)
    while i < n:
        if text[i] in SPLIT_MARKS:
            j = i + 1
            while j < n and (text[j] in SPLIT_MARKS or text[j] in CLOSERS):
                j += 1
            pieces.append(text[start:j])
            start = i = j
        else:
            i += 1
    if start < n:
        pieces.append(text[start:])
    # whitespace-only fragments glue onto a neighbour so nothing is lost
    merged = []
    for piece in pieces:
        if not piece.strip() and merged:
            merged[-1] += piece
        elif merged and not merged[-1].strip():
            merged[-1] += piece
        else:
            merged.append(piece)
    return merged


def split_sentences(paragraphs: Sequence[str]) -> list[Sentence]:
    """Split paragraphs at 。？！?! keeping the mark (and any closing quote) attached.

    A paragraph without any splitting mark becomes a single sentence.
    Blank paragraphs are skipped; if nothing remains the document is empty.
    """
    out = []
    par = 0
    for raw in paragraphs:
        if not raw or not raw.strip():
            continue
        for piece in _split_paragraph(raw):
            out.append(Sentence(text=piece, index=len(out), paragraph_index=par))
        par += 1
    if not out:
        raise DataError("empty document")
    return out


def is_heading_candidate(text: str, word_count: int, sole_in_paragraph: bool) -> bool:
    stripped = text.strip()
    return sole_in_paragraph and word_count < 6 and bool(stripped) and stripped[-1] not in TERMINAL_PUNCT


def detect_headings(doc: Document, word_counts: Sequence[int]) -> Document:
    if len(word_counts) != len(doc.sentences):
        raise DataError(
            f"word_counts has {len(word_counts)} entries for {len(doc.sentences)} sentences"
        )
    per_par = {}
    for s in doc.sentences:
        per_par[s.paragraph_index] = per_par.get(s.paragraph_index, 0) + 1

    sentences = []
    current = None
    for s, wc in zip(doc.sentences, word_counts):
        heading = is_heading_candidate(s.text, wc, per_par[s.paragraph_index] == 1)
        if heading:
            current = s.text
        sentences.append(replace(s, is_heading=heading, heading_text=current))
    return replace(doc, sentences=tuple(sentences))


def assign_heading_text(sentences: Sequence[Sentence]) -> list[Sentence]:
    """Recompute heading_text from is_heading flags (nearest preceding heading)."""
    current = None
    out = []
    for s in sentences:
        if s.is_heading:
            current = s.text
        out.append(replace(s, heading_text=current))
    return out


@dataclass(frozen=True)
class LabelViolation:
    index: int
    label: SectionLabel
    reason: str


def validate_labels(doc: Document) -> list[LabelViolation]:
    labels = doc.labels
    for i, lab in enumerate(labels):
        if lab is None:
            raise DataError(f"document {doc.id}: sentence {i} has no gold label")
    targets = [i for i, lab in enumerate(labels) if lab in TARGET_LABELS]
    if not targets:
        return []
    first, last = targets[0], targets[-1]
    out = []
    for i, lab in enumerate(labels):
        if lab is SectionLabel.PRE and i > first:
            out.append(LabelViolation(i, lab, "Pre after a Subject/Method/Result sentence"))
        elif lab is SectionLabel.AFTER and i < last:
            out.append(LabelViolation(i, lab, "After before a Subject/Method/Result sentence"))
    return out


def _parse_tokens(items, lineno):
    toks = []
    for item in items:
        if not isinstance(item, str) or "/" not in item:
            raise DataError(f"line {lineno}: malformed token {item!r}")
        surface, _, pos = item.rpartition("/")
        toks.append(Token(surface, pos))
    return tuple(toks)


def document_from_record(rec: dict, lineno: int = 0) -> Document:
    if not isinstance(rec, dict) or "id" not in rec:
        raise DataError(f"line {lineno}: record needs an 'id'")
    doc_id = str(rec["id"])
    title = str(rec.get("title", ""))
    meta = rec.get("meta")
    if "sentences" in rec:
        sents = []
        for i, srec in enumerate(rec["sentences"]):
            try:
                text = srec["text"]
                par = int(srec["paragraph"])
            except (KeyError, TypeError, ValueError):
                raise DataError(f"line {lineno}: sentence {i} needs 'text' and 'paragraph'") from None
            label = SectionLabel.parse(srec["label"]) if srec.get("label") is not None else None
            tokens = _parse_tokens(srec["tokens"], lineno) if srec.get("tokens") is not None else None
            sents.append(Sentence(text, i, par, bool(srec.get("heading", False)), label, None, tokens))
        sentences = assign_heading_text(sents)
    elif "paragraphs" in rec:
        paragraphs = rec["paragraphs"]
        if not isinstance(paragraphs, list):
            raise DataError(f"line {lineno}: 'paragraphs' must be a list")
        sentences = split_sentences(paragraphs)
    else:
        raise DataError(f"line {lineno}: record needs 'sentences' or 'paragraphs'")
    return Document(doc_id, title, tuple(sentences), meta)


def document_to_record(doc: Document) -> dict:
    sents = []
    for s in doc.sentences:
        rec = {"text": s.text, "paragraph": s.paragraph_index}
        if s.is_heading:
            rec["heading"] = True
        if s.gold_label is not None:
            rec["label"] = s.gold_label.slug
        if s.tokens is not None:
            rec["tokens"] = [str(t) for t in s.tokens]
        sents.append(rec)
    out = {"id": doc.id, "title": doc.title, "sentences": sents}
    if doc.source_meta is not None:
        out["meta"] = doc.source_meta
    return out


def load_corpus(path) -> Corpus:
    docs = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"line {lineno}: malformed JSON ({exc.msg})") from None
            doc = document_from_record(rec, lineno)
            if doc.id in seen:
                raise DataError(f"line {lineno}: duplicate document id {doc.id!r}")
            seen.add(doc.id)
            docs.append(doc)
    return Corpus.of(docs)


def save_corpus(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in corpus.documents:
            fh.write(json.dumps(document_to_record(doc), ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def with_labels(doc: Document, labels: Sequence) -> Document:
    if len(labels) != len(doc.sentences):
        raise DataError(f"document {doc.id}: {len(labels)} labels for {len(doc.sentences)} sentences")
    sents = tuple(replace(s, gold_label=SectionLabel.parse(lab)) for s, lab in zip(doc.sentences, labels))
    return replace(doc, sentences=sents)
