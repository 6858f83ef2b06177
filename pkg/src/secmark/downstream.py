"""Entity co-occurrence on section-filtered text.

Predicted Subject / Method / Result sentences are kept, dictionary entities
are matched on raw sentence text (longest match, no overlaps) and entity
pairs are counted once per paper.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping, Sequence

from .corpus import TARGET_LABELS, Document, SectionLabel
from .errors import DataError

CATEGORIES = ("disease", "medicine", "acupoint")


class EntityDictionary:
    """surface -> category, with a longest-first scan."""

    def __init__(self, entries: Mapping[str, str] | Iterable[tuple[str, str]] = ()):
        items = entries.items() if isinstance(entries, Mapping) else entries
        self._entries = {}
        for surface, category in items:
            if not surface:
                raise DataError("empty entity surface")
            if category not in CATEGORIES:
                raise DataError(f"unknown entity category {category!r}; expected one of {CATEGORIES}")
            if surface in self._entries and self._entries[surface] != category:
                raise DataError(f"entity {surface!r} listed under two categories")
            self._entries[surface] = category
        self.max_len = max((len(s) for s in self._entries), default=0)

    def __len__(self):
        return len(self._entries)

    def __contains__(self, surface):
        return surface in self._entries

    def __getitem__(self, surface):
        return self._entries[surface]

    def items(self):
        return sorted(self._entries.items())

    def match(self, text: str) -> list[tuple[str, str]]:
        """Left-to-right scan taking the longest dictionary surface at each position."""
        out = []
        i, n = 0, len(text)
        while i < n:
            for size in range(min(self.max_len, n - i), 0, -1):
                piece = text[i:i + size]
                if piece in self._entries:
                    out.append((piece, self._entries[piece]))
                    i += size
                    break
            else:
                i += 1
        return out


def load_dictionary(path) -> EntityDictionary:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n\r")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"dictionary line {lineno}: expected surface<TAB>category")
            if parts[1] not in CATEGORIES:
                raise DataError(f"dictionary line {lineno}: unknown category {parts[1]!r}")
            rows.append((parts[0], parts[1]))
    surfaces = [r[0] for r in rows]
    dup = [s for s, c in Counter(surfaces).items() if c > 1]
    if dup:
        raise DataError(f"dictionary lists {dup[0]!r} more than once")
    return EntityDictionary(rows)


def save_dictionary(d: EntityDictionary, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for surface, cat in d.items():
            fh.write(f"{surface}\t{cat}\n")


def filter_sentences(doc: Document, labels: Sequence | None = None, keep=TARGET_LABELS) -> list:
    """Sentences whose (predicted) label is Subject, Method or Result, in order."""
    if labels is None:
        labels = doc.labels
        if any(lab is None for lab in labels):
            raise DataError(f"document {doc.id} has no labels to filter on")
    if len(labels) != len(doc):
        raise DataError(f"{len(labels)} labels for {len(doc)} sentences")
    keep = {SectionLabel.parse(k) for k in keep}
    return [s for s, lab in zip(doc.sentences, labels) if SectionLabel.parse(lab) in keep]


def extract_entities(sentences, dictionary: EntityDictionary) -> set[tuple[str, str]]:
    """Deduplicated (surface, category) set found in the given sentences."""
    found = set()
    for s in sentences:
        found.update(dictionary.match(s.text if hasattr(s, "text") else str(s)))
    return found


def extract_sentence_entities(sentences, dictionary: EntityDictionary) -> list[set]:
    return [set(dictionary.match(s.text if hasattr(s, "text") else str(s))) for s in sentences]


def _pair_key(a, b):
    return (a, b) if a <= b else (b, a)


@dataclass
class CooccurrenceTable:
    """Unordered entity pair -> number of papers (or sentences) where both occur."""

    counts: dict = field(default_factory=dict)

    def __post_init__(self):
        for (a, b), c in self.counts.items():
            if not a < b:
                raise DataError(f"pair {a!r}, {b!r} is not in canonical order")
            if c < 1:
                raise DataError("co-occurrence counts must be >= 1")

    def __len__(self):
        return len(self.counts)

    def get(self, a, b) -> int:
        return self.counts.get(_pair_key(a, b), 0)

    def relations(self, threshold=0) -> set:
        return {pair for pair, c in self.counts.items() if c > threshold}

    def category_pair(self, pair) -> tuple[str, str]:
        (_, ca), (_, cb) = pair
        return tuple(sorted((ca, cb)))

    def category_totals(self, threshold=0) -> dict:
        out = Counter(self.category_pair(p) for p in self.relations(threshold))
        return {cp: out.get(cp, 0) for cp in category_pairs()}


def category_pairs():
    return [tuple(sorted(p)) for p in combinations(CATEGORIES, 2)] + [(c, c) for c in CATEGORIES]


def cooccurrence_counts(entity_sets: Iterable[Iterable]) -> CooccurrenceTable:
    """Each distinct unordered pair within one set adds 1.

    Pass per-paper sets for paper-level counts, or per-sentence sets for the
    sentence-level variant.
    """
    counts = Counter()
    for ents in entity_sets:
        for a, b in combinations(sorted(set(ents)), 2):
            counts[(a, b)] += 1
    return CooccurrenceTable(dict(counts))


def paper_cooccurrence(docs: Sequence[Document], dictionary: EntityDictionary, predictions=None,
                       filtered=True, sentence_level=False) -> CooccurrenceTable:
    """Co-occurrence over documents, optionally restricted to predicted S/M/R sentences."""
    sets = []
    for i, doc in enumerate(docs):
        labels = predictions[i] if predictions is not None else None
        sents = filter_sentences(doc, labels) if filtered else list(doc.sentences)
        if sentence_level:
            sets.extend(extract_sentence_entities(sents, dictionary))
        else:
            sets.append(extract_entities(sents, dictionary))
    return cooccurrence_counts(sets)


@dataclass(frozen=True)
class OverlapRow:
    threshold: float
    category_pair: tuple  # ("all", "all") for the total
    unfiltered: int
    filtered: int
    overlap: int

    @property
    def percentage(self):
        """|filtered relations| / |unfiltered relations| in percent (0 when both are empty)."""
        return 100.0 * self.filtered / self.unfiltered if self.unfiltered else 0.0


def threshold_overlap_stats(unfiltered: CooccurrenceTable, filtered: CooccurrenceTable,
                            thresholds=(0, 2, 5, 10, 20)) -> list[OverlapRow]:
    rows = []
    for t in thresholds:
        if t < 0:
            raise DataError("thresholds must be non-negative")
        u = unfiltered.relations(t)
        f = filtered.relations(t)
        for cp in category_pairs():
            uu = {p for p in u if unfiltered.category_pair(p) == cp}
            ff = {p for p in f if filtered.category_pair(p) == cp}
            rows.append(OverlapRow(t, cp, len(uu), len(ff), len(uu & ff)))
        rows.append(OverlapRow(t, ("all", "all"), len(u), len(f), len(u & f)))
    return rows


def write_overlap_report(rows: Sequence[OverlapRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["threshold", "category_a", "category_b", "unfiltered", "filtered", "overlap", "percentage"])
        for r in rows:
            w.writerow([f"{r.threshold:g}", r.category_pair[0], r.category_pair[1], r.unfiltered, r.filtered,
                        r.overlap, f"{r.percentage:.2f}"])


def export_edges(table: CooccurrenceTable, min_count, path) -> int:
    """Write pairs with count > min_count; returns the number of edges written."""
    edges = sorted(((c, pair) for pair, c in table.counts.items() if c > min_count),
                   key=lambda e: (-e[0], e[1]))
    try:
        fh = open(path, "w", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot write edge list {path}: {exc.strerror}") from None
    with fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["entity_a", "category_a", "entity_b", "category_b", "count"])
        for c, ((ea, ca), (eb, cb)) in edges:
            w.writerow([ea, ca, eb, cb, c])
    return len(edges)


def read_edges(path) -> CooccurrenceTable:
    counts = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["entity_a", "category_a", "entity_b", "category_b", "count"]:
            raise DataError("edge list has an unexpected header")
        for lineno, row in enumerate(reader, 2):
            if len(row) != 5:
                raise DataError(f"edge list line {lineno}: expected 5 fields")
            try:
                c = int(row[4])
            except ValueError:
                raise DataError(f"edge list line {lineno}: count is not an integer") from None
            counts[_pair_key((row[0], row[1]), (row[2], row[3]))] = c
    return CooccurrenceTable(counts)
