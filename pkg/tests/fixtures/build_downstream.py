"""Regenerate the co-occurrence fixtures: ``python3 tests/fixtures/build_downstream.py``."""

import json
from pathlib import Path

import numpy as np

HERE = Path(__file__).parent

ENTITIES = {
    "disease": ["哮喘", "支气管炎", "感冒", "咳嗽", "肺气肿", "鼻炎", "湿疹", "失眠"],
    "medicine": ["细辛", "白芥子", "甘遂", "延胡索", "麝香", "生姜", "黄芪", "当归", "川芎", "麻黄"],
    "acupoint": ["大椎", "肺俞", "膏肓", "膻中", "丰隆", "内关", "脾俞", "膈俞"],
}
FILLER = ["采用", "观察", "本组", "显示", "经过", "方案", "记录", "分析", "评价", "均有"]
TARGET = ("subject", "method", "result")


def sentence(rng, ents):
    words = [FILLER[i] for i in rng.integers(len(FILLER), size=int(rng.integers(2, 5)))]
    for e in ents:
        words.insert(int(rng.integers(0, len(words) + 1)), e)
    return "".join(words) + "。"


def paper(pid, blocks):
    """blocks: list of (label, entity list)."""
    return {"id": pid, "title": pid, "sentences": [
        {"text": text, "paragraph": i, "label": lab} for i, (lab, text) in enumerate(blocks)]}


def random_papers(rng, n=20):
    every = [e for group in ENTITIES.values() for e in group]
    out = []
    for p in range(n):
        labels = ["pre"] + sorted(rng.choice(TARGET, size=int(rng.integers(3, 7)))) + ["after", "other"]
        blocks = []
        for lab in labels:
            k = int(rng.integers(0, 4))
            ents = [every[i] for i in rng.choice(len(every), size=k, replace=False)]
            blocks.append((lab, sentence(rng, ents)))
        out.append(paper(f"p{p:02d}", blocks))
    return out


def overlap_papers(rng, n=60):
    """Core entities only in Subject/Method/Result sentences; rare noise entities only in Pre/After."""
    core = ENTITIES["disease"][:3] + ENTITIES["medicine"][:5] + ENTITIES["acupoint"][:4]
    noise = ENTITIES["disease"][3:] + ENTITIES["medicine"][5:] + ENTITIES["acupoint"][4:]
    presence = np.linspace(0.9, 0.45, len(core))
    spread = [1, 1, 1, 2, 2, 2, 3, 3, 4, 5, 6, 8, 9, 9]
    noise_papers = {e: set(rng.choice(n, size=k, replace=False).tolist()) for e, k in zip(noise, spread)}
    out = []
    for p in range(n):
        chosen = [e for e, q in zip(core, presence) if rng.random() < q]
        blocks = [("pre", sentence(rng, [e for e in noise if p in noise_papers[e]][:2]))]
        for i, lab in enumerate(TARGET):
            blocks.append((lab, sentence(rng, chosen[i::3])))
        blocks.append(("after", sentence(rng, [e for e in noise if p in noise_papers[e]][2:])))
        out.append(paper(f"q{p:02d}", blocks))
    return out


def write_jsonl(rows, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in rows:
            fh.write(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n")


if __name__ == "__main__":
    with open(HERE / "entities.tsv", "w", encoding="utf-8", newline="\n") as fh:
        for cat, words in ENTITIES.items():
            for w in words:
                fh.write(f"{w}\t{cat}\n")
    write_jsonl(random_papers(np.random.default_rng(8)), HERE / "downstream_papers.jsonl")
    write_jsonl(overlap_papers(np.random.default_rng(88)), HERE / "overlap_papers.jsonl")
