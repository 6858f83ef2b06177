"""Per-label metrics, document-level cross-validation, paired t-tests and experiment runs."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import LABELS, N_LABELS, TARGET_LABELS, SectionLabel
from .errors import DataError, SecmarkError
from .validation import check_documents, check_label_array, document_labels

METRICS = ("precision", "recall", "f1")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: np.ndarray
    predicted: np.ndarray
    gold: np.ndarray

    def __post_init__(self):
        if np.any(self.tp > np.minimum(self.predicted, self.gold)):
            raise DataError("true positives exceed predicted or gold counts")

    @classmethod
    def from_labels(cls, predicted, gold):
        pred = check_label_array(predicted)
        gold = check_label_array(gold)
        if pred.size != gold.size:
            raise DataError(f"{pred.size} predictions for {gold.size} gold labels")
        return cls(np.bincount(gold[pred == gold], minlength=N_LABELS),
                   np.bincount(pred, minlength=N_LABELS), np.bincount(gold, minlength=N_LABELS))

    def __add__(self, other):
        return ConfusionCounts(self.tp + other.tp, self.predicted + other.predicted, self.gold + other.gold)


def f1_score(p, r):
    return 2.0 * p * r / (p + r) if p + r > 0 else 0.0


@dataclass
class EvalReport:
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    counts: ConfusionCounts | None = None
    model: str = ""
    config: dict = field(default_factory=dict)
    folds: list = field(default_factory=list)

    def metric(self, name) -> np.ndarray:
        if name not in METRICS:
            raise DataError(f"unknown metric {name!r}")
        return getattr(self, name)

    def label(self, lab):
        i = int(SectionLabel.parse(lab))
        return float(self.precision[i]), float(self.recall[i]), float(self.f1[i])

    def macro_f1(self, labels=TARGET_LABELS) -> float:
        return float(np.mean([self.f1[int(lab)] for lab in labels]))


def report_from_counts(counts: ConfusionCounts, model="", config=None) -> EvalReport:
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(counts.predicted > 0, counts.tp / np.maximum(counts.predicted, 1), 0.0)
        r = np.where(counts.gold > 0, counts.tp / np.maximum(counts.gold, 1), 0.0)
    f = np.array([f1_score(a, b) for a, b in zip(p, r)])
    return EvalReport(p, r, f, counts, model, dict(config or {}))


def precision_recall_f1(predicted, gold, model="", config=None) -> EvalReport:
    """Per-label P = tp/predicted, R = tp/gold, F1 = 2PR/(P+R); zero denominators give 0."""
    return report_from_counts(ConfusionCounts.from_labels(predicted, gold), model, config)


def kfold_split(corpus, k=10, seed=0):
    """k (train, test) pairs of document index arrays; fold sizes differ by at most one."""
    n = corpus if isinstance(corpus, (int, np.integer)) else len(check_documents(corpus, allow_empty=True))
    if k < 2:
        raise DataError("k-fold needs k >= 2")
    if k > n:
        raise DataError(f"k={k} exceeds the number of documents ({n})")
    order = np.random.default_rng(seed).permutation(n)
    folds = np.array_split(order, k)
    out = []
    for i in range(k):
        test = np.sort(folds[i])
        train = np.sort(np.concatenate([folds[j] for j in range(k) if j != i]))
        out.append((train, test))
    return out


# Student-t distribution via the regularized incomplete beta function

def _betacf(a, b, x, max_iter=300, eps=1e-15):
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = tiny if abs(d) < tiny else d
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            break
    return h


def regularized_beta(x, a, b):
    if not 0.0 <= x <= 1.0:
        raise DataError("incomplete beta argument outside [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    ln_front = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(ln_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(ln_front) * _betacf(b, a, 1.0 - x) / b


def student_t_sf2(t, df):
    """Two-sided tail probability P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise DataError("degrees of freedom must be positive")
    if math.isinf(t):
        return 0.0
    return regularized_beta(df / (df + t * t), 0.5 * df, 0.5)


def student_t_cdf(t, df):
    tail = 0.5 * student_t_sf2(t, df)
    return 1.0 - tail if t >= 0 else tail


@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float
    df: int
    degenerate: bool = False

    @property
    def stars(self):
        return significance_stars(self.p)


def paired_ttest(a, b) -> TTestResult:
    """Paired t-test on a - b with k - 1 degrees of freedom.

    All-zero differences give t = 0, p = 1.  Constant nonzero differences have
    zero variance: p = 0 and the result is flagged degenerate.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DataError("paired t-test needs two equal-length 1-D samples")
    k = a.size
    if k < 2:
        raise DataError("paired t-test needs at least 2 pairs")
    d = a - b
    if np.all(d == 0):
        return TTestResult(0.0, 1.0, k - 1)
    mean = d.mean()
    sd = d.std(ddof=1)
    if sd == 0:
        return TTestResult(math.copysign(math.inf, mean), 0.0, k - 1, degenerate=True)
    t = mean / (sd / math.sqrt(k))
    return TTestResult(float(t), float(student_t_sf2(t, k - 1)), k - 1)


def significance_stars(p) -> str:
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.1:
        return "*"
    return ""


# experiments

@dataclass(frozen=True)
class ModelSpec:
    name: str
    kind: str  # lr | svm | crf | slstm | clstm | blstm
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("lr", "svm", "crf", "slstm", "clstm", "blstm"):
            raise DataError(f"unknown model kind {self.kind!r}")

    @property
    def neural(self):
        return self.kind in ("slstm", "clstm", "blstm")


@dataclass
class ModelResult:
    spec: ModelSpec
    folds: list = field(default_factory=list)

    def values(self, metric, label) -> np.ndarray:
        i = int(SectionLabel.parse(label))
        return np.array([f.metric(metric)[i] for f in self.folds])

    def macro_values(self, labels=TARGET_LABELS) -> np.ndarray:
        return np.array([f.macro_f1(labels) for f in self.folds])

    def mean_prf(self) -> dict:
        return {lab: tuple(float(self.values(m, lab).mean()) for m in METRICS) for lab in LABELS}

    def mean_macro_f1(self, labels=TARGET_LABELS) -> float:
        return float(self.macro_values(labels).mean())


@dataclass
class ExperimentReport:
    results: dict
    ttests: dict = field(default_factory=dict)
    k: int = 0
    seed: int = 0

    def ttest(self, a, b, metric="f1", label=None) -> TTestResult:
        """Paired t-test of model ``a`` vs ``b`` on a per-label metric, or on macro-F1 when label is None."""
        if label is None:
            return paired_ttest(self.results[a].macro_values(), self.results[b].macro_values())
        return self.ttests[(a, b, metric, SectionLabel.parse(label))]


def _classic_fold(train_docs, test_docs, featurizer_params, threshold, global_pipeline=None):
    import scipy.sparse as sp

    from .features.assemble import SectionFeaturizer
    from .selection import InformationGainSelector

    if global_pipeline is not None:
        feat, sel = global_pipeline
    else:
        feat = SectionFeaturizer(**featurizer_params).fit(train_docs)
        sel = None
    Xtr = feat.transform_documents(train_docs)
    Xte = feat.transform_documents(test_docs)
    ytr = [document_labels(d) for d in train_docs]
    if sel is None:
        sel = InformationGainSelector(threshold).fit(sp.vstack(Xtr), np.concatenate(ytr))
    Xtr = [sel.transform(x) for x in Xtr]
    Xte = [sel.transform(x) for x in Xte]
    if Xtr[0].shape[1] == 0:
        raise DataError(f"IG threshold {threshold} removed every feature")
    return Xtr, ytr, Xte


def make_estimator(spec: ModelSpec, seed):
    from .classic import LinearChainCRF, LinearSVMClassifier, LogisticRegressionClassifier
    from .neural.slstm import SLSTMClassifier

    params = dict(spec.params)
    params.setdefault("seed", seed)
    if spec.kind == "lr":
        return LogisticRegressionClassifier(**params)
    if spec.kind == "svm":
        return LinearSVMClassifier(**params)
    if spec.kind == "crf":
        return LinearChainCRF(**params)
    return SLSTMClassifier(variant=spec.kind, **params)


def _fit_predict(spec, seed, train_docs, test_docs, classic_data):
    import scipy.sparse as sp

    est = make_estimator(spec, seed)
    if spec.neural:
        est.fit(train_docs)
        return np.concatenate(est.predict(test_docs))
    Xtr, ytr, Xte = classic_data
    if spec.kind == "crf":
        est.fit(Xtr, ytr)
        return np.concatenate(est.predict(Xte))
    est.fit(sp.vstack(Xtr), np.concatenate(ytr))
    return est.predict(sp.vstack(Xte))


def _run_fold(args):
    fold, k, train_docs, test_docs, specs, seed, featurizer_params, threshold, global_pipeline, need_classic = args
    gold = np.concatenate([document_labels(d) for d in test_docs])
    try:
        classic = (_classic_fold(train_docs, test_docs, featurizer_params, threshold, global_pipeline)
                   if need_classic else None)
    except SecmarkError as exc:
        raise type(exc)(f"fold {fold + 1}/{k}, feature pipeline: {exc}") from exc
    out = []
    for spec in specs:
        try:
            pred = _fit_predict(spec, seed, train_docs, test_docs, classic)
        except SecmarkError as exc:
            raise type(exc)(f"fold {fold + 1}/{k}, model {spec.name}: {exc}") from exc
        out.append(precision_recall_f1(pred, gold, spec.name, spec.params))
    return out


class SequenceJobs:
    """Ordered map over a process pool (or inline for a single job)."""

    def __init__(self, jobs=1):
        if jobs < 1:
            raise DataError("jobs must be >= 1")
        self.jobs = int(jobs)

    def map(self, fn, items):
        items = list(items)
        if self.jobs == 1 or len(items) < 2:
            return [fn(x) for x in items]
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=min(self.jobs, len(items))) as pool:
            return list(pool.map(fn, items))


def run_experiment(corpus, specs, feature_config=None, threshold=0.009, k=10, seed=0, paper_mode=False,
                   ttests=True, progress=None, jobs=1) -> ExperimentReport:
    """k-fold (document level) train/evaluate of every model spec, plus pairwise paired t-tests.

    Classic models share one featurizer + IG selector per fold, fitted on the
    training documents.  ``paper_mode`` instead fits them once on the whole
    corpus.  Neural models learn from the documents directly.
    """
    docs = check_documents(corpus, tokenized=True, labeled=True)
    specs = list(specs)
    if not specs:
        raise DataError("no models to evaluate")
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise DataError("model names must be unique")
    featurizer_params = dict(feature_config or {})
    featurizer_params.setdefault("seed", seed)
    splits = kfold_split(len(docs), k, seed)
    results = {s.name: ModelResult(s) for s in specs}
    need_classic = any(not s.neural for s in specs)
    global_pipeline = None
    if need_classic and paper_mode:
        from .features.assemble import SectionFeaturizer
        from .selection import InformationGainSelector

        feat = SectionFeaturizer(**featurizer_params).fit(docs)
        X = feat.transform(docs)
        y = np.concatenate([document_labels(d) for d in docs])
        global_pipeline = (feat, InformationGainSelector(threshold).fit(X, y))
    jobs = SequenceJobs(jobs)
    args = [(fold, k, [docs[i] for i in tr], [docs[i] for i in te], specs, seed, featurizer_params, threshold,
             global_pipeline, need_classic) for fold, (tr, te) in enumerate(splits)]
    # map() yields in fold order whatever the worker count, so results are identical for any jobs
    for fold, reports in enumerate(jobs.map(_run_fold, args)):
        for spec, rep in zip(specs, reports):
            results[spec.name].folds.append(rep)
            if progress is not None:
                progress(fold, spec.name, rep)
    report = ExperimentReport(results, k=k, seed=seed)
    if ttests:
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                for metric in METRICS:
                    for lab in LABELS:
                        res = paired_ttest(results[a].values(metric, lab), results[b].values(metric, lab))
                        report.ttests[(a, b, metric, lab)] = res
                        report.ttests[(b, a, metric, lab)] = TTestResult(-res.t, res.p, res.df, res.degenerate)
    return report


def write_report_csv(report: ExperimentReport, path) -> None:
    """Rows ``model,label,metric,mean,std,fold_1..fold_k``."""
    k = max((len(r.folds) for r in report.results.values()), default=0)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "label", "metric", "mean", "std"] + [f"fold_{i + 1}" for i in range(k)])
        for name, res in report.results.items():
            for lab in LABELS:
                for metric in METRICS:
                    vals = res.values(metric, lab)
                    std = vals.std(ddof=1) if vals.size > 1 else 0.0
                    w.writerow([name, lab.slug, metric, f"{vals.mean():.6f}", f"{std:.6f}"]
                               + [f"{v:.6f}" for v in vals])


def render_table(report: ExperimentReport, labels=TARGET_LABELS, reference=None) -> str:
    """Text table of mean P/R/F1 (percent) per label; stars mark a significant
    difference from the ``reference`` model (default: the first)."""
    names = list(report.results)
    reference = reference or names[0]
    header = ["Model"] + [f"{lab.slug.capitalize()} {m[0].upper()}" for lab in labels for m in METRICS]
    rows = [header]
    for name in names:
        res = report.results[name]
        row = [name]
        for lab in labels:
            for metric in METRICS:
                cell = f"{100 * res.values(metric, lab).mean():.1f}"
                if name != reference and (name, reference, metric, lab) in report.ttests:
                    cell += report.ttests[(name, reference, metric, lab)].stars
                row.append(cell)
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = ["  ".join(c.ljust(wd) for c, wd in zip(r, widths)).rstrip() for r in rows]
    lines.append("*** p<0.01; ** p<0.05; * p<0.1 (paired t-test across folds vs " + reference + ")")
    return "\n".join(lines) + "\n"
