import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from secmark.corpus import Document, SectionLabel as L, Sentence, load_corpus
from secmark.downstream import (
    CooccurrenceTable,
    EntityDictionary,
    category_pairs,
    cooccurrence_counts,
    export_edges,
    extract_entities,
    filter_sentences,
    load_dictionary,
    paper_cooccurrence,
    read_edges,
    save_dictionary,
    threshold_overlap_stats,
    write_overlap_report,
)
from secmark.errors import DataError

A, B, C, D = ("哮喘", "disease"), ("大椎", "acupoint"), ("细辛", "medicine"), ("肺俞", "acupoint")


def doc(texts, labels=None):
    labels = labels or [None] * len(texts)
    return Document("p", "", tuple(Sentence(t, i, i, gold_label=lab) for i, (t, lab) in enumerate(zip(texts, labels))))


def test_filter_keeps_target_sections_in_order():
    d = doc(["a。", "b。", "c。", "d。"], [L.PRE, L.SUBJECT, L.METHOD, L.AFTER])
    kept = filter_sentences(d)
    assert [s.index for s in kept] == [1, 2]
    assert filter_sentences(d, [L.PRE, L.AFTER, L.OTHER, L.PRE]) == []
    with pytest.raises(DataError):
        filter_sentences(doc(["a。"]))
    with pytest.raises(DataError):
        filter_sentences(d, [L.PRE])


def test_extract_from_case_report_text():
    d = EntityDictionary({"哮喘": "disease", "大椎": "acupoint"})
    s = "采用三伏贴治疗小儿哮喘，将药物贴敷在大椎等穴位。"
    assert extract_entities([s], d) == {A, B}
    assert extract_entities([s], EntityDictionary()) == set()


def test_longest_match_wins():
    d = EntityDictionary({"支气管哮喘": "disease", "哮喘": "disease"})
    assert d.match("支气管哮喘") == [("支气管哮喘", "disease")]
    assert d.match("哮喘与支气管哮喘") == [("哮喘", "disease"), ("支气管哮喘", "disease")]


@settings(max_examples=50, deadline=None)
@given(st.permutations([("支气管哮喘", "disease"), ("哮喘", "disease"), ("大椎", "acupoint"),
                        ("大椎穴", "acupoint"), ("细辛", "medicine")]))
def test_extraction_independent_of_insertion_order(entries):
    text = ["支气管哮喘患者取大椎穴，并用细辛。", "哮喘。"]
    ref = EntityDictionary(sorted(entries))
    assert extract_entities(text, EntityDictionary(entries)) == extract_entities(text, ref)


def test_dictionary_validation(tmp_path):
    with pytest.raises(DataError):
        EntityDictionary({"x": "herb"})
    with pytest.raises(DataError):
        EntityDictionary([("x", "disease"), ("x", "medicine")])
    p = tmp_path / "d.tsv"
    p.write_text("哮喘\tdisease\n哮喘\tdisease\n", encoding="utf-8")
    with pytest.raises(DataError, match="more than once"):
        load_dictionary(p)
    p.write_text("哮喘 disease\n", encoding="utf-8")
    with pytest.raises(DataError, match="line 1"):
        load_dictionary(p)
    d = EntityDictionary([A, B, C])
    save_dictionary(d, p)
    assert load_dictionary(p).items() == d.items()


def test_paper_level_counts():
    t = cooccurrence_counts([{A, B}, {A, B}, {C}])
    assert t.get(A, B) == 2 and t.get(B, A) == 2 and len(t) == 1
    # sentence-level would count the pair twice inside one paper
    d = EntityDictionary([A, B])
    paper = doc(["哮喘大椎。", "哮喘大椎。"], [L.SUBJECT, L.RESULT])
    assert paper_cooccurrence([paper], d).get(A, B) == 1
    assert paper_cooccurrence([paper], d, sentence_level=True).get(A, B) == 2


def brute_force(sets):
    out = {}
    for s in sets:
        s = list(set(s))
        for i in range(len(s)):
            for j in range(len(s)):
                if s[i] < s[j]:
                    out[(s[i], s[j])] = out.get((s[i], s[j]), 0) + 1
    return out


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sets(st.sampled_from([A, B, C, D])), min_size=0, max_size=8))
def test_counts_match_brute_force(sets):
    t = cooccurrence_counts(sets)
    assert t.counts == brute_force(sets)
    assert all(c >= 1 and a < b for (a, b), c in t.counts.items())


def test_table_invariants():
    with pytest.raises(DataError):
        CooccurrenceTable({(B, A): 1})
    with pytest.raises(DataError):
        CooccurrenceTable({(A, B): 0})
    assert len(category_pairs()) == 6


def test_filtering_never_increases_counts(fixtures_dir):
    docs = load_corpus(fixtures_dir / "overlap_papers.jsonl").documents
    d = load_dictionary(fixtures_dir / "entities.tsv")
    u = paper_cooccurrence(docs, d, filtered=False)
    f = paper_cooccurrence(docs, d)
    assert all(c <= u.get(*pair) for pair, c in f.counts.items())


def test_overlap_identical_and_subset(tmp_path):
    u = cooccurrence_counts([{A, B, C}, {A, B}, {A, B, D}])
    rows = threshold_overlap_stats(u, u, thresholds=(0, 1, 2))
    assert all(r.percentage == 100.0 for r in rows if r.unfiltered)
    f = cooccurrence_counts([{A, B}])
    total = [r for r in threshold_overlap_stats(u, f, (0,)) if r.category_pair == ("all", "all")][0]
    assert total.percentage == pytest.approx(100 * 1 / 5) and total.overlap == 1
    with pytest.raises(DataError):
        threshold_overlap_stats(u, f, (-1,))
    write_overlap_report(rows, tmp_path / "o.csv")
    lines = (tmp_path / "o.csv").read_text().splitlines()
    assert lines[0] == "threshold,category_a,category_b,unfiltered,filtered,overlap,percentage"
    assert len(lines) == 1 + 3 * 7


def test_edges(tmp_path):
    p = tmp_path / "e.csv"
    assert export_edges(CooccurrenceTable(), 0, p) == 0
    assert p.read_text() == "entity_a,category_a,entity_b,category_b,count\n"
    t = cooccurrence_counts([{A, B, C}] * 12 + [{A, D}] * 3)
    assert export_edges(t, 10, p) == 3
    back = read_edges(p)
    assert back.counts == {k: v for k, v in t.counts.items() if v > 10}
    export_edges(t, 0, p)
    counts = [int(line.rsplit(",", 1)[1]) for line in p.read_text().splitlines()[1:]]
    assert counts == sorted(counts, reverse=True)
    assert read_edges(p).counts == t.counts


def test_unwritable_edges_path(tmp_path):
    with pytest.raises(DataError, match="cannot write"):
        export_edges(cooccurrence_counts([{A, B}]), 0, tmp_path / "missing" / "e.csv")
