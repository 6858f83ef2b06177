"""``secmark`` command line: one subcommand per pipeline stage.

Exit codes: 0 ok, 1 usage, 2 data, 3 numerical.  Errors are one line on
stderr: ``secmark: error[<code>]: <message>``.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import serialization
from .config import (
    MODEL_KINDS,
    PAPER_MODELS,
    RunConfig,
    default_seed,
    load_config,
    parse_assignment,
)
from .corpus import Corpus, load_corpus, save_corpus, with_labels
from .errors import ConfigError, DataError, SecmarkError, UsageError

FEATURES_KIND = "feature-matrix"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="INI run configuration")
    p.add_argument("--paper-defaults", action="store_true", help="load the published hyperparameter set")
    p.add_argument("--seed", type=int, help="global seed (falls back to $SECMARK_SEED, then 0)")
    p.add_argument("--jobs", type=int, help="parallel folds")
    p.add_argument("--no-timestamp", action="store_true", help="omit the timestamp line from text reports")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a feature or model setting; 'kind.key=value' targets one model")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="secmark", description="Section identification for clinical papers.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")
    sub.required = True

    def add(name, help_):
        return sub.add_parser(name, parents=[common], help=help_, description=help_)

    p = add("ingest", "split raw paragraph records into a sentence-level corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)

    p = add("segment", "tokenize, POS-tag and mark headings")
    p.add_argument("--corpus", required=True)
    p.add_argument("--lexicon")
    p.add_argument("--keep-headings", action="store_true", help="keep existing heading flags")
    p.add_argument("--out", required=True)

    p = add("featurize", "fit the featurizer and write the sentence feature matrix")
    p.add_argument("--corpus", required=True)
    p.add_argument("--families", help="comma-separated feature families")
    p.add_argument("--out", required=True, help="feature matrix file")
    p.add_argument("--names", help="feature names text file (one per line)")

    p = add("select", "information gain scores and threshold selection")
    p.add_argument("--features", required=True, help="feature matrix from 'featurize'")
    p.add_argument("--threshold", type=float)
    p.add_argument("--scores", required=True, help="TSV feature<TAB>ig")
    p.add_argument("--kept", help="kept feature names text file")

    p = add("train", "train a labeler on a gold corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--model", choices=MODEL_KINDS)
    p.add_argument("--threshold", type=float)
    p.add_argument("--embeddings", help="pre-trained word embeddings (neural models)")
    p.add_argument("--log", help="training log CSV (neural models)")
    p.add_argument("--weights", help="CSV weight dump (CRF)")
    p.add_argument("--out", required=True, help="model file")

    p = add("predict", "label the sentences of a corpus with a trained model")
    p.add_argument("--model", required=True, help="model file")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="corpus with predicted labels")

    p = add("evaluate", "k-fold cross-validation with paired t-tests")
    p.add_argument("--corpus", required=True)
    p.add_argument("--models", help="comma-separated model kinds, e.g. lr,svm,crf")
    p.add_argument("--k", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--paper-mode", action="store_true", help="fit features and IG on the whole corpus")
    p.add_argument("--out", required=True, help="output directory (report.csv, report.txt)")

    p = add("sweep", "evaluate one model across IG thresholds")
    p.add_argument("--corpus", required=True)
    p.add_argument("--model", choices=MODEL_KINDS)
    p.add_argument("--thresholds", help="comma-separated thresholds")
    p.add_argument("--k", type=int)
    p.add_argument("--paper-mode", action="store_true")
    p.add_argument("--out", required=True, help="sweep CSV")

    p = add("embed", "train skip-gram word embeddings")
    p.add_argument("--corpus", required=True)
    p.add_argument("--dim", type=int, default=200)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--out", required=True)

    p = add("cluster", "k-means clusters and a 2-D PCA projection of word vectors")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--clusters", type=int, default=5)
    p.add_argument("--out", required=True, help="CSV word,cluster,pc1,pc2")

    p = add("extract", "dictionary entities per document")
    p.add_argument("--corpus", required=True)
    p.add_argument("--dict", dest="entity_dict")
    p.add_argument("--all-sentences", action="store_true", help="do not filter by section label")
    p.add_argument("--out", required=True, help="TSV id<TAB>surface<TAB>category")

    p = add("cooccur", "entity co-occurrence edges and the filtered/unfiltered overlap report")
    p.add_argument("--corpus", required=True)
    p.add_argument("--dict", dest="entity_dict")
    p.add_argument("--min-count", type=int, default=0, help="keep pairs with count > N")
    p.add_argument("--all-sentences", action="store_true")
    p.add_argument("--sentence-level", action="store_true", help="count per sentence instead of per paper")
    p.add_argument("--overlap", help="overlap report CSV")
    p.add_argument("--thresholds", default="0,2,5,10,20")
    p.add_argument("--out", required=True, help="edge list CSV")

    p = add("synth", "write a synthetic labeled corpus and its lexicon")
    p.add_argument("--docs", type=int, default=371)
    p.add_argument("--ambiguity", type=float, default=0.0, help="chance a sentence borrows another label's words")
    p.add_argument("--raw", action="store_true", help="omit tokens")
    p.add_argument("--out", required=True, help="output directory")
    return parser


# config plumbing

def _resolve_config(args, kind=None) -> tuple[RunConfig, dict]:
    """Layering: built-in defaults < --paper-defaults < --config file < flags."""
    config = RunConfig(seed=default_seed())
    if kind:
        config.set_model(kind)
    if args.paper_defaults:
        config.apply_paper_defaults()
    if args.config:
        load_config(args.config, config)
        if kind:
            config.set_model(kind)
        if args.paper_defaults:
            # flags outrank the file, and --paper-defaults is a flag
            config.apply_paper_defaults()
    if args.seed is not None:
        config.seed = args.seed
    if args.jobs is not None:
        config.jobs = args.jobs
    if getattr(args, "threshold", None) is not None:
        config.threshold = args.threshold
    if getattr(args, "k", None) is not None:
        config.k = args.k
    if getattr(args, "paper_mode", False):
        config.paper_mode = True
    per_kind = {}
    for item in args.set:
        head = item.split("=", 1)[0]
        if "." in head:
            target, rest = item.split(".", 1)
            if target not in MODEL_KINDS:
                raise ConfigError(f"unknown model {target!r} in --set {item!r}")
            _, key, value = parse_assignment(rest, target)
            per_kind.setdefault(target, {})[key] = value
            continue
        where, key, value = parse_assignment(item, config.model)
        if where == "features":
            config.features[key] = value
        else:
            config.model_params[key] = value
    if getattr(args, "families", None):
        config.features["families"] = tuple(f.strip() for f in args.families.split(",") if f.strip())
    config.validate(check_paths=True)
    return config, per_kind


def _params_for(kind, config: RunConfig, per_kind, paper_defaults):
    params = dict(PAPER_MODELS.get(kind, {})) if paper_defaults else {}
    if kind == config.model:
        params.update(config.model_params)
    params.update(per_kind.get(kind, {}))
    return params


def _load_tokenized(path):
    corpus = load_corpus(path)
    if not all(d.is_tokenized for d in corpus.documents):
        raise DataError(f"{path}: corpus is not tokenized; run 'secmark segment' first")
    return corpus


def _ensure_parent(path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)


# subcommands

def cmd_ingest(args):
    config, _ = _resolve_config(args)
    corpus = load_corpus(args.corpus)
    _ensure_parent(args.out)
    save_corpus(corpus, args.out)
    print(f"{len(corpus.documents)} documents, {corpus.n_sentences} sentences -> {args.out}")


def cmd_segment(args):
    from .segmentation import load_lexicon, segment_document

    config, _ = _resolve_config(args)
    lex_path = args.lexicon or config.lexicon
    if lex_path is None:
        raise ConfigError("segment needs --lexicon (or [paths] lexicon)")
    lex = load_lexicon(lex_path)
    corpus = load_corpus(args.corpus)
    docs = [segment_document(d, lex, headings=not args.keep_headings) for d in corpus.documents]
    _ensure_parent(args.out)
    save_corpus(Corpus(tuple(docs), corpus.labeled), args.out)
    n_head = sum(s.is_heading for d in docs for s in d.sentences)
    print(f"{len(docs)} documents segmented, {n_head} headings -> {args.out}")


def cmd_featurize(args):
    from .features.assemble import SectionFeaturizer
    from .validation import document_labels

    config, _ = _resolve_config(args)
    corpus = _load_tokenized(args.corpus)
    feat = SectionFeaturizer(**{"seed": config.seed, **config.features}).fit(corpus)
    X = feat.transform(corpus).tocsr()
    X.sort_indices()
    labeled = all(d.is_labeled for d in corpus.documents)
    sections = {"data": X.data, "indices": X.indices.astype(np.int64), "indptr": X.indptr.astype(np.int64),
                "doc_lengths": np.array([len(d) for d in corpus.documents], dtype=np.int64)}
    if labeled:
        sections["labels"] = np.concatenate([document_labels(d) for d in corpus.documents]) \
            if corpus.documents else np.zeros(0, dtype=np.int64)
    meta = {"features": list(feat.space_.names), "documents": [d.id for d in corpus.documents],
            "shape": list(X.shape)}
    _ensure_parent(args.out)
    serialization.save(args.out, FEATURES_KIND, meta, sections)
    if args.names:
        feat.space_.save_text(args.names)
    print(f"{X.shape[0]} sentences x {X.shape[1]} features -> {args.out}")


def _load_feature_matrix(path):
    _, meta, secs = serialization.load(path, FEATURES_KIND)
    X = sp.csr_matrix((secs["data"], secs["indices"], secs["indptr"]), shape=tuple(meta["shape"]))
    return X, secs.get("labels"), meta


def cmd_select(args):
    from .features.sparse import FeatureSpace
    from .selection import FeatureScore, information_gain_matrix, select_features, write_scores

    config, _ = _resolve_config(args)
    X, y, meta = _load_feature_matrix(args.features)
    if y is None:
        raise DataError(f"{args.features} has no gold labels; featurize a labeled corpus")
    if X.shape[0] == 0:
        raise DataError("feature matrix has no rows")
    ig = information_gain_matrix(X, y)
    scores = [FeatureScore(n, float(v)) for n, v in zip(meta["features"], ig)]
    _ensure_parent(args.scores)
    write_scores(scores, args.scores)
    space, _ = select_features(scores, config.threshold)
    if args.kept:
        FeatureSpace(space.names).save_text(args.kept)
    print(f"{len(space.names)} of {len(scores)} features have IG >= {config.threshold:g}")


def cmd_train(args):
    from .neural.embeddings import load_embeddings
    from .pipeline import CLASSIC_KINDS, ClassicLabeler, NeuralLabeler

    config, per_kind = _resolve_config(args, args.model)
    corpus = _load_tokenized(args.corpus)
    if not all(d.is_labeled for d in corpus.documents):
        raise DataError(f"{args.corpus}: training needs gold labels on every sentence")
    kind = config.model
    params = _params_for(kind, config, per_kind, args.paper_defaults)
    _ensure_parent(args.out)
    if kind in CLASSIC_KINDS:
        labeler = ClassicLabeler.fit(corpus, kind, config.features, config.threshold, params, config.seed)
        if args.weights:
            if kind != "crf":
                raise UsageError("--weights is only available for the CRF")
            labeler.model.dump_weights(args.weights)
    else:
        emb_path = args.embeddings or config.embeddings
        emb = load_embeddings(emb_path) if emb_path else None
        labeler = NeuralLabeler.fit(corpus, kind, params, config.seed, embeddings=emb, log_path=args.log)
    labeler.save(args.out)
    print(f"trained {kind} on {len(corpus.documents)} documents -> {args.out}")


def cmd_predict(args):
    from .pipeline import labels_to_enum, load_labeler

    _resolve_config(args)
    labeler = load_labeler(args.model)
    corpus = _load_tokenized(args.corpus)
    preds = labeler.predict_documents(corpus)
    docs = tuple(with_labels(d, labels_to_enum(p)) for d, p in zip(corpus.documents, preds))
    _ensure_parent(args.out)
    save_corpus(Corpus(docs, labeled=True), args.out)
    print(f"labeled {sum(len(p) for p in preds)} sentences -> {args.out}")


def _timestamp_line(args):
    if args.no_timestamp:
        return ""
    return f"# generated {datetime.datetime.now().isoformat(timespec='seconds')}\n"


def cmd_evaluate(args):
    from .eval import ModelSpec, render_table, run_experiment, write_report_csv

    kinds = [m.strip() for m in (args.models or "").split(",") if m.strip()]
    config, per_kind = _resolve_config(args, kinds[0] if kinds else None)
    kinds = kinds or [config.model]
    for k in kinds:
        if k not in MODEL_KINDS:
            raise UsageError(f"unknown model {k!r}; choose from {', '.join(MODEL_KINDS)}")
    if len(set(kinds)) != len(kinds):
        raise UsageError("each model may be listed once")
    corpus = _load_tokenized(args.corpus)
    specs = [ModelSpec(k, k, _params_for(k, config, per_kind, args.paper_defaults)) for k in kinds]
    report = run_experiment(corpus, specs, feature_config=config.features, threshold=config.threshold,
                            k=config.k, seed=config.seed, paper_mode=config.paper_mode, jobs=config.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_report_csv(report, out / "report.csv")
    text = render_table(report)
    lines = [f"{name}: macro-F1 {res.mean_macro_f1():.4f}" for name, res in report.results.items()]
    with open(out / "report.txt", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_timestamp_line(args))
        fh.write(f"# {config.k}-fold cross-validation, seed {config.seed}, IG threshold {config.threshold:g}\n")
        fh.write(text)
        fh.write("\n".join(lines) + "\n")
    sys.stdout.write(text)


def cmd_sweep(args):
    from .eval import ModelSpec
    from .selection import DEFAULT_SWEEP, sweep_thresholds, write_sweep

    config, per_kind = _resolve_config(args, args.model)
    if args.thresholds:
        try:
            thresholds = [float(t) for t in args.thresholds.split(",") if t.strip()]
        except ValueError:
            raise UsageError(f"--thresholds must be numbers, got {args.thresholds!r}") from None
    else:
        thresholds = list(DEFAULT_SWEEP)
    corpus = _load_tokenized(args.corpus)
    spec = ModelSpec(config.model, config.model, _params_for(config.model, config, per_kind, args.paper_defaults))
    rows = sweep_thresholds(corpus, spec, thresholds, folds=config.k, seed=config.seed,
                            paper_mode=config.paper_mode, feature_config=config.features, jobs=config.jobs)
    _ensure_parent(args.out)
    write_sweep(rows, args.out)
    print(f"{len(thresholds)} thresholds -> {args.out}")


def cmd_embed(args):
    from .features.lexical import feature_words
    from .neural.embeddings import save_embeddings, train_word_embeddings

    config, _ = _resolve_config(args)
    corpus = _load_tokenized(args.corpus)
    table = train_word_embeddings((feature_words(s.tokens) for d in corpus.documents for s in d.sentences),
                                  dim=args.dim, window=args.window, negatives=args.negatives,
                                  epochs=args.epochs, seed=config.seed, min_count=args.min_count)
    _ensure_parent(args.out)
    save_embeddings(table, args.out)
    print(f"{len(table.words) - 2} words x {table.vectors.shape[1]} -> {args.out}")


def cmd_cluster(args):
    from .neural.cluster import cluster_embeddings
    from .neural.embeddings import load_embeddings

    config, _ = _resolve_config(args)
    table = load_embeddings(args.embeddings)
    labels, proj = cluster_embeddings(table, args.clusters, config.seed)
    _ensure_parent(args.out)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["word", "cluster", "pc1", "pc2"])
        for word, lab, (x, y) in zip(table.words[2:], labels, proj):
            w.writerow([word, int(lab), f"{x:.6f}", f"{y:.6f}"])
    print(f"{len(labels)} words in {args.clusters} clusters -> {args.out}")


def _entity_dict(args, config):
    from .downstream import load_dictionary

    path = args.entity_dict or config.entity_dict
    if path is None:
        raise ConfigError("an entity dictionary is required (--dict or [paths] entity_dict)")
    return load_dictionary(path)


def cmd_extract(args):
    from .downstream import extract_entities, filter_sentences

    config, _ = _resolve_config(args)
    dictionary = _entity_dict(args, config)
    corpus = load_corpus(args.corpus)
    _ensure_parent(args.out)
    n = 0
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("id\tsurface\tcategory\n")
        for doc in corpus.documents:
            sents = doc.sentences if args.all_sentences else filter_sentences(doc)
            for surface, cat in sorted(extract_entities(sents, dictionary)):
                fh.write(f"{doc.id}\t{surface}\t{cat}\n")
                n += 1
    print(f"{n} document entities -> {args.out}")


def cmd_cooccur(args):
    from .downstream import export_edges, paper_cooccurrence, threshold_overlap_stats, write_overlap_report

    config, _ = _resolve_config(args)
    dictionary = _entity_dict(args, config)
    docs = load_corpus(args.corpus).documents
    table = paper_cooccurrence(docs, dictionary, filtered=not args.all_sentences,
                               sentence_level=args.sentence_level)
    _ensure_parent(args.out)
    n = export_edges(table, args.min_count, args.out)
    if args.overlap:
        try:
            thresholds = [float(t) for t in args.thresholds.split(",") if t.strip()]
        except ValueError:
            raise UsageError(f"--thresholds must be numbers, got {args.thresholds!r}") from None
        unfiltered = paper_cooccurrence(docs, dictionary, filtered=False, sentence_level=args.sentence_level)
        filtered = table if not args.all_sentences else paper_cooccurrence(
            docs, dictionary, filtered=True, sentence_level=args.sentence_level)
        write_overlap_report(threshold_overlap_stats(unfiltered, filtered, thresholds), args.overlap)
    print(f"{n} edges -> {args.out}")


def cmd_synth(args):
    from .segmentation import save_lexicon
    from .synthetic import SyntheticConfig, generate_synthetic_corpus, synthetic_lexicon

    config, _ = _resolve_config(args)
    if args.docs < 0:
        raise UsageError("--docs must be >= 0")
    if not 0.0 <= args.ambiguity <= 1.0:
        raise UsageError("--ambiguity must lie in [0, 1]")
    syn = SyntheticConfig(ambiguity=args.ambiguity)
    corpus = generate_synthetic_corpus(config.seed, args.docs, config=syn, tokenize=not args.raw)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_corpus(corpus, out / "corpus.jsonl")
    save_lexicon(synthetic_lexicon(syn), out / "lexicon.tsv")
    print(f"{args.docs} documents, {corpus.n_sentences} sentences -> {out}")


COMMANDS = {
    "ingest": cmd_ingest, "segment": cmd_segment, "featurize": cmd_featurize, "select": cmd_select,
    "train": cmd_train, "predict": cmd_predict, "evaluate": cmd_evaluate, "sweep": cmd_sweep,
    "embed": cmd_embed, "cluster": cmd_cluster, "extract": cmd_extract, "cooccur": cmd_cooccur,
    "synth": cmd_synth,
}


def _fail(code, message):
    message = " ".join(str(message).split())
    sys.stderr.write(f"secmark: error[{code}]: {message}\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        COMMANDS[args.command](args)
    except SecmarkError as exc:
        return _fail(exc.exit_code, exc)
    except OSError as exc:
        where = f" {exc.filename}" if exc.filename else ""
        return _fail(2, f"{exc.strerror or exc}{':' if where else ''}{where}")
    except MemoryError:
        return _fail(3, "out of memory")
    except (FloatingPointError, OverflowError, ZeroDivisionError) as exc:
        return _fail(3, f"numerical failure: {exc}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
