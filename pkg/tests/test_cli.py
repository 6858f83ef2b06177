import hashlib
import re
import subprocess
import sys

import numpy as np
import pytest

from secmark import serialization
from secmark.cli import _resolve_config, build_parser, main
from secmark.corpus import load_corpus
from secmark.errors import ConfigError

ERR = re.compile(r"^secmark: error\[(\d)\]: \S.*$")


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def assert_error(code, err, expected):
    assert code == expected
    lines = err.splitlines()
    assert len(lines) == 1 and ERR.match(lines[0]) and ERR.match(lines[0]).group(1) == str(expected)


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--seed", "7", "--docs", "16", "--out", str(out)]) == 0
    return out


def test_usage_errors_exit_1(capsys, tmp_path):
    assert_error(*run([], capsys)[::2], 1)
    assert_error(*run(["train", "--bogus"], capsys)[::2], 1)
    assert_error(*run(["synth", "--docs", "-1", "--out", tmp_path], capsys)[::2], 1)
    cfg = tmp_path / "c.ini"
    cfg.write_text("[features]\ncolour = blue\n")
    code, _, err = run(["synth", "--config", cfg, "--out", tmp_path], capsys)
    assert_error(code, err, 1)
    assert "colour" in err


def test_data_error_exit_2(capsys, tmp_path):
    code, _, err = run(["ingest", "--corpus", tmp_path / "nope.jsonl", "--out", tmp_path / "o.jsonl"], capsys)
    assert_error(code, err, 2)
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": "a", "sentences": [{"text": "x", "paragraph": 0, "label": "intro"}]}\n')
    assert_error(*run(["ingest", "--corpus", bad, "--out", tmp_path / "o.jsonl"], capsys)[::2], 2)


def test_numerical_error_exit_3(capsys, tmp_path, synth_dir):
    model = tmp_path / "lr.bin"
    args = ["train", "--corpus", synth_dir / "corpus.jsonl", "--model", "lr", "--set", "families=bow",
            "--set", "epochs=2", "--out", model]
    assert run(args, capsys)[0] == 0
    kind, meta, secs = serialization.load(model)
    key = next(k for k in secs if "weight" in k)
    secs[key] = np.full_like(secs[key], np.nan)
    serialization.save(model, kind, meta, secs)
    code, _, err = run(["predict", "--model", model, "--corpus", synth_dir / "corpus.jsonl",
                        "--out", tmp_path / "p.jsonl"], capsys)
    assert_error(code, err, 3)


def test_synth_is_deterministic_and_seed_env_fallback(tmp_path, monkeypatch):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert main(["synth", "--seed", "7", "--docs", "50", "--out", str(a)]) == 0
    assert main(["synth", "--seed", "7", "--docs", "50", "--out", str(b)]) == 0
    monkeypatch.setenv("SECMARK_SEED", "7")
    assert main(["synth", "--docs", "50", "--out", str(c)]) == 0
    for name in ("corpus.jsonl", "lexicon.tsv"):
        assert digest(a / name) == digest(b / name) == digest(c / name)
    assert len(load_corpus(a / "corpus.jsonl").documents) == 50
    monkeypatch.setenv("SECMARK_SEED", "seven")
    assert main(["synth", "--docs", "1", "--out", str(c)]) == 1


def test_config_layering(tmp_path):
    parser = build_parser()
    cfg = tmp_path / "c.ini"
    cfg.write_text("[selection]\nthreshold = 0.05\n[features]\nlda_topics = 7\n[eval]\nk = 3\n")

    def resolve(*extra):
        return _resolve_config(parser.parse_args(["evaluate", "--corpus", "x", "--out", "y", *extra]), "crf")[0]

    base = resolve()
    assert base.threshold == 0.009 and base.k == 10 and base.model_params == {}
    paper = resolve("--paper-defaults")
    assert paper.features["lda_topics"] == 40 and paper.model_params == {"window": 2}
    filed = resolve("--config", str(cfg))
    assert filed.threshold == 0.05 and filed.features["lda_topics"] == 7 and filed.k == 3
    flagged = resolve("--config", str(cfg), "--threshold", "0.2", "--k", "4", "--set", "lda_topics=9")
    assert flagged.threshold == 0.2 and flagged.k == 4 and flagged.features["lda_topics"] == 9
    assert resolve("--set", "crf.window=1").model_params == {}
    with pytest.raises(ConfigError):
        resolve("--set", "hidden=3")


def test_pipeline_end_to_end(capsys, tmp_path, synth_dir):
    corpus = synth_dir / "corpus.jsonl"
    before = digest(corpus)
    feats = tmp_path / "X.bin"
    assert run(["featurize", "--corpus", corpus, "--families", "bow,pos,head,loc,len", "--out", feats,
                "--names", tmp_path / "names.txt"], capsys)[0] == 0
    assert run(["select", "--features", feats, "--scores", tmp_path / "ig.tsv",
                "--kept", tmp_path / "kept.txt"], capsys)[0] == 0
    ig = [float(line.split("\t")[1]) for line in (tmp_path / "ig.tsv").read_text().splitlines()]
    assert ig == sorted(ig, reverse=True)

    model = tmp_path / "crf.bin"
    assert run(["train", "--corpus", corpus, "--model", "crf", "--set", "families=bow,loc",
                "--weights", tmp_path / "w.csv", "--out", model], capsys)[0] == 0
    pred = tmp_path / "pred.jsonl"
    assert run(["predict", "--model", model, "--corpus", corpus, "--out", pred], capsys)[0] == 0
    gold = load_corpus(corpus).documents
    got = load_corpus(pred).documents
    assert [len(d) for d in got] == [len(d) for d in gold]

    dict_path = tmp_path / "d.tsv"
    dict_path.write_text("针刺\tacupoint\n哮喘\tdisease\n", encoding="utf-8")
    assert run(["extract", "--corpus", pred, "--dict", dict_path, "--out", tmp_path / "ents.tsv"], capsys)[0] == 0
    assert run(["cooccur", "--corpus", pred, "--dict", dict_path, "--overlap", tmp_path / "ov.csv",
                "--out", tmp_path / "edges.csv"], capsys)[0] == 0
    assert (tmp_path / "edges.csv").read_text().startswith("entity_a,category_a,entity_b,category_b,count\n")
    assert digest(corpus) == before


def test_evaluate_report_shape_and_timestamp(capsys, tmp_path, synth_dir):
    corpus = synth_dir / "corpus.jsonl"
    args = ["evaluate", "--corpus", corpus, "--models", "lr,svm,crf", "--k", "2", "--set", "families=bow,loc",
            "--set", "lr.epochs=3", "--set", "svm.epochs=3"]
    assert run(args + ["--no-timestamp", "--out", tmp_path / "a"], capsys)[0] == 0
    assert run(args + ["--no-timestamp", "--out", tmp_path / "b", "--jobs", "2"], capsys)[0] == 0
    rows = (tmp_path / "a" / "report.csv").read_text().splitlines()
    assert len(rows) == 1 + 3 * 6 * 3
    for name in ("report.csv", "report.txt"):
        assert digest(tmp_path / "a" / name) == digest(tmp_path / "b" / name)
    assert run(args + ["--out", tmp_path / "c"], capsys)[0] == 0
    stamped = (tmp_path / "c" / "report.txt").read_text().splitlines()
    assert stamped[0].startswith("# generated ")
    assert stamped[1:] == (tmp_path / "a" / "report.txt").read_text().splitlines()
    assert_error(*run(["evaluate", "--corpus", corpus, "--models", "lr,lr", "--out", tmp_path / "d"],
                      capsys)[::2], 1)


def test_embed_and_cluster(capsys, tmp_path, synth_dir):
    emb = tmp_path / "emb.txt"
    assert run(["embed", "--corpus", synth_dir / "corpus.jsonl", "--dim", 8, "--epochs", 1, "--out", emb],
               capsys)[0] == 0
    out = tmp_path / "clusters.csv"
    assert run(["cluster", "--embeddings", emb, "--clusters", 3, "--out", out], capsys)[0] == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "word,cluster,pc1,pc2" and len(lines) > 3


def test_console_module_entry(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "secmark.cli", "cooccur", "--corpus", str(tmp_path / "x"),
                           "--out", str(tmp_path / "e.csv")], capture_output=True, text=True)
    assert proc.returncode == 1
    assert ERR.match(proc.stderr.strip()) and "dictionary" in proc.stderr
