import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from secmark.errors import DataError
from secmark.features.sparse import FeatureSpace, SparseVector
from secmark.selection import (
    DEFAULT_SWEEP,
    PAPER_THRESHOLD,
    InformationGainSelector,
    information_gain,
    information_gain_matrix,
    project,
    select_features,
    write_scores,
    write_sweep,
)


def naive_ig(presence, labels):
    """Textbook IG in bits, written out with explicit loops."""
    def h(ys):
        if not ys:
            return 0.0
        out = 0.0
        for c in set(ys):
            p = ys.count(c) / len(ys)
            out -= p * np.log2(p)
        return out

    on = [y for f, y in zip(presence, labels) if f]
    off = [y for f, y in zip(presence, labels) if not f]
    n = len(labels)
    return h(list(labels)) - len(on) / n * h(on) - len(off) / n * h(off)


def col(values):
    return sp.csr_matrix(np.asarray(values, dtype=float)[:, None])


def test_ig_examples():
    y = np.array([0, 0, 1, 1])
    assert information_gain_matrix(col([1, 1, 0, 0]), y)[0] == pytest.approx(1.0)
    assert information_gain_matrix(col([1, 1, 1, 1]), y)[0] == pytest.approx(0.0)
    assert information_gain_matrix(col([1, 0, 1, 0]), y)[0] == pytest.approx(0.0)


def test_ig_bounded_by_label_entropy_with_equality_for_determining_feature():
    y = np.array([0, 1, 2, 3, 4, 5])
    h = np.log2(6)
    assert information_gain_matrix(col([1, 0, 0, 0, 0, 0]), y)[0] < h
    # presence alone cannot separate six labels, so IG stays below H(Y)
    y2 = np.array([2, 2, 3, 3])
    assert information_gain_matrix(col([0, 0, 4, 4]), y2)[0] == pytest.approx(1.0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 5)), min_size=1, max_size=40),
       st.floats(0.1, 100))
def test_ig_matches_naive_and_is_scale_invariant(rows, scale):
    x = np.array([r[0] for r in rows], dtype=float)
    y = np.array([r[1] for r in rows])
    ig = information_gain_matrix(col(x), y)[0]
    assert ig == pytest.approx(naive_ig(list(x > 0), list(y)), abs=1e-10)
    assert information_gain_matrix(col(x * scale), y)[0] == pytest.approx(ig, abs=1e-12)
    p = np.bincount(y) / y.size
    h = -sum(q * np.log2(q) for q in p if q > 0)
    assert -1e-12 <= ig <= np.log2(6) + 1e-12
    assert ig <= h + 1e-10
    perm = np.random.default_rng(len(rows)).permutation(len(rows))
    assert information_gain_matrix(col(x[perm]), y[perm])[0] == pytest.approx(ig, abs=1e-12)


def test_information_gain_on_vectors():
    space = FeatureSpace(["bow:a", "bow:b"])
    vecs = [SparseVector([0], [2.0]), SparseVector([0], [1.0]), SparseVector([1], [1.0]), SparseVector()]
    scores = information_gain(vecs, [1, 1, 2, 2], space)
    assert [s.name for s in scores] == ["bow:a", "bow:b"]
    assert scores[0].ig == pytest.approx(1.0)
    assert scores[1].ig == pytest.approx(naive_ig([0, 0, 1, 0], [1, 1, 2, 2]))
    with pytest.raises(DataError):
        information_gain([], [], space)
    with pytest.raises(DataError):
        information_gain(vecs, [1, 2], space)


def _scores(values):
    from secmark.selection import FeatureScore
    return [FeatureScore(f"f{i}", v) for i, v in enumerate(values)]


def test_select_threshold_rules():
    scores = _scores([0.5, 0.0, 0.009, 0.0089])
    space, proj = select_features(scores, 0.0)
    assert space.names == ("f0", "f1", "f2", "f3")
    space, proj = select_features(scores, PAPER_THRESHOLD)
    assert space.names == ("f0", "f2") and proj.mapping.tolist() == [0, -1, 1, -1]
    assert len(select_features(scores, 1.0)[0]) == 0
    with pytest.raises(DataError):
        select_features(scores, -0.1)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 2.6), min_size=1, max_size=30), st.floats(0, 3), st.floats(0, 3))
def test_lower_threshold_keeps_superset(values, t1, t2):
    lo, hi = sorted((t1, t2))
    a = set(select_features(_scores(values), lo)[0].names)
    b = set(select_features(_scores(values), hi)[0].names)
    assert b <= a


@settings(max_examples=100, deadline=None)
@given(st.lists(st.booleans(), min_size=1, max_size=20), st.data())
def test_project_matches_reextraction(keep_mask, data):
    n = len(keep_mask)
    dense = np.array(data.draw(st.lists(st.integers(0, 3), min_size=n, max_size=n)), dtype=float)
    scores = _scores([1.0 if k else 0.0 for k in keep_mask])
    _, proj = select_features(scores, 0.5)
    out = project(SparseVector.from_dense(dense), proj)
    assert out == SparseVector.from_dense(dense[np.array(keep_mask)])


def test_project_identity_and_empty():
    v = SparseVector([0, 2], [1.0, 3.0])
    _, ident = select_features(_scores([1, 1, 1]), 0)
    assert project(v, ident) == v
    _, none = select_features(_scores([0, 1, 0]), 0.5)
    assert len(project(v, none)) == 0


def test_selector_estimator():
    X = sp.csr_matrix(np.array([[1, 1, 0], [1, 0, 0], [0, 1, 3], [0, 0, 1]], dtype=float))
    sel = InformationGainSelector(threshold=0.5).fit(X, np.array([0, 0, 1, 1]))
    assert sel.get_support().tolist() == [True, False, True]
    assert sel.transform(X).shape == (4, 2)
    with pytest.raises(DataError):
        sel.transform(X[:, :2])


def test_score_and_sweep_files(tmp_path):
    write_scores(_scores([0.1, 0.3, 0.1]), tmp_path / "s.tsv")
    assert (tmp_path / "s.tsv").read_text().splitlines() == ["f1\t0.3", "f0\t0.1", "f2\t0.1"]
    write_sweep([(0.009, "crf", "subject", 0.5, 0.25, 1 / 3)], tmp_path / "w.csv")
    lines = (tmp_path / "w.csv").read_text().splitlines()
    assert lines == ["threshold,model,label,precision,recall,f1", "0.009,crf,subject,0.500000,0.250000,0.333333"]


def test_default_grid_contains_operating_points():
    assert 0.009 in DEFAULT_SWEEP and 0.01 in DEFAULT_SWEEP and PAPER_THRESHOLD == 0.009
