"""Run configuration: INI-style file with sections, overridable from the command line."""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .features.assemble import FAMILIES

FEATURE_TYPES = {
    "families": tuple, "min_count": int, "lda_topics": int, "lda_alpha": float, "lda_beta": float,
    "lda_iters": int, "lda_infer_iters": int, "d2v_dim": int, "d2v_negatives": int, "d2v_epochs": int,
}

MODEL_TYPES = {
    "lr": {"l2": float, "lr": float, "epochs": int, "batch_size": int},
    "svm": {"C": float, "epochs": int, "batch_size": int},
    "crf": {"window": int, "l2": float, "optimizer": str, "max_iter": int, "tol": float},
}
_NEURAL = {"window": int, "hidden": int, "heading_filters": int, "kernel": int, "sent_len": int, "head_len": int,
           "dropout": float, "lr": float, "batch": int, "embed_dim": int, "heading_embed_dim": int,
           "max_epochs": int, "patience": int, "val_fraction": float, "embedding_epochs": int}
for _kind in ("slstm", "clstm", "blstm"):
    MODEL_TYPES[_kind] = _NEURAL
MODEL_KINDS = tuple(MODEL_TYPES)

PAPER_FEATURES = {"families": FAMILIES, "lda_topics": 40, "d2v_dim": 40}
PAPER_MODELS = {
    "crf": {"window": 2},
    "slstm": {"window": 3, "hidden": 200, "heading_filters": 200, "kernel": 3, "sent_len": 100, "head_len": 5,
              "dropout": 0.2, "lr": 0.001, "batch": 128, "embed_dim": 200},
}
PAPER_MODELS["clstm"] = dict(PAPER_MODELS["slstm"])
PAPER_MODELS["blstm"] = {**PAPER_MODELS["slstm"], "window": 0}
PAPER_THRESHOLD = 0.009
PAPER_FOLDS = 10


def default_seed() -> int:
    raw = os.environ.get("SECMARK_SEED")
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"SECMARK_SEED must be an integer, got {raw!r}") from None


def _convert(key, raw, typ):
    if isinstance(raw, str):
        raw = raw.strip()
    try:
        if typ is tuple:
            return tuple(p.strip() for p in raw.split(",") if p.strip()) if isinstance(raw, str) else tuple(raw)
        if typ is bool:
            if isinstance(raw, bool):
                return raw
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError
        if typ is float and isinstance(raw, str) and raw.lower() in ("none", ""):
            return None
        return typ(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"setting {key!r}: cannot read {raw!r} as {typ.__name__}") from None


@dataclass
class RunConfig:
    corpus: str | None = None
    lexicon: str | None = None
    entity_dict: str | None = None
    embeddings: str | None = None
    output_dir: str = "."
    features: dict = field(default_factory=dict)
    threshold: float = PAPER_THRESHOLD
    paper_mode: bool = False
    model: str = "crf"
    model_params: dict = field(default_factory=dict)
    k: int = PAPER_FOLDS
    seed: int = 0
    jobs: int = 1

    def validate(self, check_paths=True):
        if self.model not in MODEL_KINDS:
            raise ConfigError(f"unknown model {self.model!r}; choose from {', '.join(MODEL_KINDS)}")
        if self.threshold < 0:
            raise ConfigError("selection threshold must be >= 0")
        if self.k < 2:
            raise ConfigError("k must be >= 2")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        fams = self.features.get("families")
        if fams is not None:
            unknown = set(fams) - set(FAMILIES)
            if unknown:
                raise ConfigError(f"unknown feature families {sorted(unknown)}")
        allowed = MODEL_TYPES[self.model]
        for key in self.model_params:
            if key not in allowed:
                raise ConfigError(f"setting {key!r} does not apply to model {self.model!r}")
        if check_paths:
            for name in ("corpus", "lexicon", "entity_dict", "embeddings"):
                p = getattr(self, name)
                if p is not None and not Path(p).exists():
                    raise ConfigError(f"{name} path does not exist: {p}")
        return self

    def apply_paper_defaults(self):
        self.features.update(PAPER_FEATURES)
        self.threshold = PAPER_THRESHOLD
        self.k = PAPER_FOLDS
        self.model_params.update(PAPER_MODELS.get(self.model, {}))
        return self

    def set_model(self, kind):
        if kind != self.model:
            self.model = kind
            allowed = MODEL_TYPES.get(kind, {})
            self.model_params = {k: v for k, v in self.model_params.items() if k in allowed}
        return self


def load_config(path, config: RunConfig | None = None) -> RunConfig:
    """Read an INI file into ``config`` (or a fresh RunConfig); unknown keys are errors."""
    config = config or RunConfig(seed=default_seed())
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise ConfigError(f"config {path}: {str(exc).splitlines()[0]}") from None
    known = {"paths", "features", "selection", "model", "eval", "run"}
    for section in parser.sections():
        if section not in known:
            raise ConfigError(f"unknown config section [{section}]")
    if parser.has_section("paths"):
        for key, raw in parser.items("paths"):
            if key not in ("corpus", "lexicon", "entity_dict", "embeddings", "output_dir"):
                raise ConfigError(f"unknown path setting {key!r}")
            setattr(config, key, raw.strip())
    if parser.has_section("features"):
        for key, raw in parser.items("features"):
            if key not in FEATURE_TYPES:
                raise ConfigError(f"unknown feature setting {key!r}")
            config.features[key] = _convert(key, raw, FEATURE_TYPES[key])
    if parser.has_section("selection"):
        for key, raw in parser.items("selection"):
            if key == "threshold":
                config.threshold = _convert(key, raw, float)
            elif key == "paper_mode":
                config.paper_mode = _convert(key, raw, bool)
            else:
                raise ConfigError(f"unknown selection setting {key!r}")
    if parser.has_section("model"):
        items = dict(parser.items("model"))
        if "kind" in items:
            config.set_model(items.pop("kind").strip())
        types = MODEL_TYPES.get(config.model)
        if types is None:
            raise ConfigError(f"unknown model {config.model!r}")
        for key, raw in items.items():
            if key not in types:
                raise ConfigError(f"setting {key!r} does not apply to model {config.model!r}")
            config.model_params[key] = _convert(key, raw, types[key])
    for section, key, typ in (("eval", "k", int), ("run", "seed", int), ("run", "jobs", int)):
        if parser.has_section(section) and parser.has_option(section, key):
            setattr(config, key, _convert(key, parser.get(section, key), typ))
    for section in ("eval", "run"):
        if parser.has_section(section):
            extra = set(dict(parser.items(section))) - {"k", "seed", "jobs"}
            if extra:
                raise ConfigError(f"unknown [{section}] setting {sorted(extra)[0]!r}")
    return config


def parse_assignment(text, kind):
    """``key=value`` from ``--set`` flags, typed by the model's settings table."""
    if "=" not in text:
        raise ConfigError(f"expected key=value, got {text!r}")
    key, raw = text.split("=", 1)
    key = key.strip()
    if key in FEATURE_TYPES:
        return "features", key, _convert(key, raw, FEATURE_TYPES[key])
    types = MODEL_TYPES.get(kind, {})
    if key in types:
        return "model", key, _convert(key, raw, types[key])
    raise ConfigError(f"unknown setting {key!r} for model {kind!r}")
