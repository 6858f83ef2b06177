import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from secmark.corpus import SectionLabel as L
from secmark.errors import DataError
from secmark.eval import (
    ConfusionCounts,
    ModelSpec,
    f1_score,
    kfold_split,
    paired_ttest,
    precision_recall_f1,
    render_table,
    run_experiment,
    significance_stars,
    student_t_cdf,
    write_report_csv,
)
from secmark.synthetic import generate_synthetic_corpus


def naive_prf(pred, gold, lab):
    tp = sum(1 for p, g in zip(pred, gold) if p == g == lab)
    npred = sum(1 for p in pred if p == lab)
    ngold = sum(1 for g in gold if g == lab)
    p = tp / npred if npred else 0.0
    r = tp / ngold if ngold else 0.0
    return p, r, (2 * p * r / (p + r) if p + r else 0.0)


def test_f1_reproduces_printed_cell():
    assert round(100 * f1_score(0.890, 0.861), 1) == 87.5


def test_perfect_prediction():
    gold = [0, 1, 1, 2, 3, 4]
    rep = precision_recall_f1(gold, gold)
    for lab in set(gold):
        assert rep.label(lab) == (1.0, 1.0, 1.0)
    assert rep.label(L.OTHER) == (0.0, 0.0, 0.0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=20, max_size=20))
def test_matches_naive_counting(pairs):
    pred = [p for p, _ in pairs]
    gold = [g for _, g in pairs]
    rep = precision_recall_f1(pred, gold)
    for lab in range(6):
        assert rep.label(lab) == pytest.approx(naive_prf(pred, gold, lab))
    assert rep.counts.gold.sum() == 20 and rep.counts.predicted.sum() == 20
    for p, r, f in zip(rep.precision, rep.recall, rep.f1):
        assert f == pytest.approx(f1_score(r, p))
        if p > 0 and r > 0:
            assert min(p, r) - 1e-12 <= f <= max(p, r) + 1e-12


def test_length_mismatch_and_count_invariant():
    with pytest.raises(DataError):
        precision_recall_f1([0, 1], [0])
    with pytest.raises(DataError):
        ConfusionCounts(np.array([2]), np.array([1]), np.array([3]))


def test_kfold_split():
    folds = kfold_split(371, 10, seed=4)
    sizes = sorted(len(te) for _, te in folds)
    assert sizes == [37] * 9 + [38]
    tests = np.concatenate([te for _, te in folds])
    assert sorted(tests.tolist()) == list(range(371))
    for tr, te in folds:
        assert not set(tr) & set(te) and len(tr) + len(te) == 371
    assert all(np.array_equal(a[1], b[1]) for a, b in zip(folds, kfold_split(371, 10, seed=4)))
    with pytest.raises(DataError):
        kfold_split(10, 1)
    with pytest.raises(DataError):
        kfold_split(3, 4)


def test_ttest_conventions():
    r = paired_ttest([1, 2, 3], [1, 2, 3])
    assert (r.t, r.p) == (0.0, 1.0)
    r = paired_ttest([2, 3, 4, 5], [1, 2, 3, 4])
    assert r.p == 0.0 and r.degenerate
    r = paired_ttest([1, 2, 3, 4, 5], [0, 0, 0, 0, 0])
    assert r.t == pytest.approx(4.242640687, rel=1e-9) and r.df == 4
    assert r.p == pytest.approx(0.013236, abs=5e-6)
    with pytest.raises(DataError):
        paired_ttest([1], [2])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=2, max_size=12))
def test_ttest_matches_scipy_and_is_antisymmetric(pairs):
    a = np.array([p[0] for p in pairs])
    b = np.array([p[1] for p in pairs])
    d = a - b
    if np.all(d == 0) or d.std(ddof=1) < 1e-9 * max(1.0, np.abs(d).max()):
        return
    ours = paired_ttest(a, b)
    ref = stats.ttest_rel(a, b)
    assert ours.t == pytest.approx(ref.statistic, rel=1e-9, abs=1e-9)
    assert ours.p == pytest.approx(ref.pvalue, rel=1e-7, abs=1e-12)
    back = paired_ttest(b, a)
    assert back.t == pytest.approx(-ours.t) and back.p == pytest.approx(ours.p)


@pytest.mark.parametrize("t, df", [(0.0, 3), (1.5, 1), (-2.2, 7), (4.0, 30), (0.3, 200)])
def test_t_cdf_against_scipy(t, df):
    assert student_t_cdf(t, df) == pytest.approx(stats.t.cdf(t, df), abs=1e-12)


def test_stars():
    assert [significance_stars(p) for p in (0.005, 0.03, 0.07, 0.5)] == ["***", "**", "*", ""]


@pytest.fixture(scope="module")
def tiny_corpus():
    return generate_synthetic_corpus(9, 12)


FEATS = {"families": ("bow", "loc", "len")}


def test_single_model_two_folds(tiny_corpus, tmp_path):
    rep = run_experiment(tiny_corpus, [ModelSpec("lr", "lr", {"epochs": 5})], FEATS, threshold=0.0, k=2)
    assert len(rep.results["lr"].folds) == 2 and rep.ttests == {}
    write_report_csv(rep, tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "model,label,metric,mean,std,fold_1,fold_2" and len(lines) == 1 + 6 * 3


def test_identical_specs_give_p_one_and_runs_are_deterministic(tiny_corpus):
    specs = [ModelSpec("a", "lr", {"epochs": 5}), ModelSpec("b", "lr", {"epochs": 5})]
    rep = run_experiment(tiny_corpus, specs, FEATS, threshold=0.0, k=3, seed=1)
    assert all(r.p == 1.0 for r in rep.ttests.values())
    again = run_experiment(tiny_corpus, specs, FEATS, threshold=0.0, k=3, seed=1, jobs=2)
    for name in ("a", "b"):
        for f1, f2 in zip(rep.results[name].folds, again.results[name].folds):
            assert np.array_equal(f1.f1, f2.f1) and np.array_equal(f1.precision, f2.precision)
    table = render_table(rep)
    assert table.splitlines()[0].startswith("Model") and "paired t-test" in table


def test_crf_beats_lr_on_neighbor_dependent_corpus():
    corpus = generate_synthetic_corpus(3, 40)
    specs = [ModelSpec("lr", "lr"), ModelSpec("crf", "crf", {"window": 1})]
    rep = run_experiment(corpus, specs, FEATS, threshold=0.0, k=4, seed=0)
    assert rep.results["crf"].mean_macro_f1() >= rep.results["lr"].mean_macro_f1()


def test_experiment_errors(tiny_corpus):
    with pytest.raises(DataError):
        run_experiment(tiny_corpus, [], FEATS)
    with pytest.raises(DataError):
        run_experiment(tiny_corpus, [ModelSpec("x", "lr"), ModelSpec("x", "svm")], FEATS)
    with pytest.raises(DataError):
        ModelSpec("x", "han")
