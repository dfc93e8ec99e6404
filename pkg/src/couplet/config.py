"""Plain-text ``key = value`` configuration shared by every subcommand."""

from __future__ import annotations

import os
from pathlib import Path

ENV_VAR = "COUPLET_CONFIG"

# key -> (default, help); the default's type is the key's type.
KEYS: dict[str, tuple[object, str]] = {
    "corpus": ("", "training corpus, one 'antecedent<TAB>subsequent' per line"),
    "min_freq": (10, "drop characters seen fewer times than this"),
    "val_n": (-1, "validation pairs (-1: scaled default)"),
    "test_n": (-1, "test pairs (-1: scaled default)"),
    "vocab": ("vocab.tsv", "vocabulary file (written by training)"),
    "lm_checkpoint": ("lm.ckpt", "antecedent language model checkpoint"),
    "s2s_checkpoint": ("s2s.ckpt", "subsequent-clause model checkpoint"),
    "head_table": ("heads.tsv", "head-character posterior table"),
    "tone_lexicon": ("", "tone lexicon (empty: bundled sample)"),
    "sentiment_lexicon": ("", "sentiment lexicon (empty: bundled sample)"),
    "log": ("", "JSON-lines generation log (empty: no log)"),
    "seed": (0, "seed for initialisation, batching, clustering and sampling"),
    "cell": ("lstm", "recurrent cell: lstm or rnn"),
    "embedding": (32, "character embedding width"),
    "hidden": (64, "recurrent hidden width"),
    "lm_layers": (2, "language-model layers"),
    "s2s_layers": (2, "encoder/decoder layers"),
    "attention": (64, "attention projection width"),
    "epochs": (30, "training epochs"),
    "batch_size": (128, "mini-batch size"),
    "lr": (0.001, "initial Adam learning rate"),
    "lr_decay": (0.5, "learning-rate factor when validation loss stalls"),
    "clip": (5.0, "gradient clipping threshold"),
    "clip_mode": ("norm", "gradient clipping: norm (global L2) or element"),
    "init_scale": (0.5, "uniform initialisation half-width"),
    "min_len": (5, "shortest antecedent"),
    "max_len": (12, "longest antecedent"),
    "beam_width": (4, "hypotheses kept per step"),
    "clusters": (2, "K-means clusters per step (must divide beam_width)"),
    "ngram_block": (2, "forbid repeating an n-gram of this order"),
    "length_norm": (False, "rank hypotheses by per-character log-probability"),
    "antecedent_candidates": (4, "antecedents kept for the second stage"),
    "subsequent_candidates": (4, "subsequents kept per antecedent"),
    "w_length": (0.25, "re-rank weight of the length score"),
    "w_repeat": (0.25, "re-rank weight of the repetition score"),
    "w_tone": (0.25, "re-rank weight of the tone score"),
    "w_sentiment": (0.25, "re-rank weight of the sentiment score"),
    "head_alpha": (1.0, "additive smoothing for head posteriors"),
    "sample_heads": (False, "draw head characters instead of taking the top two"),
}

PATH_KEYS = ("corpus", "vocab", "lm_checkpoint", "s2s_checkpoint", "head_table",
             "tone_lexicon", "sentiment_lexicon", "log")


class ConfigError(ValueError):
    pass


def defaults() -> dict:
    return {k: v for k, (v, _) in KEYS.items()}


def coerce(key: str, raw):
    if key not in KEYS:
        raise ConfigError(f"unknown config key {key!r}")
    default = KEYS[key][0]
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return raw


def parse_config(text: str, source: str = "<string>") -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            out[key] = coerce(key, value)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
    return out


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Defaults, then the file (``path`` or $COUPLET_CONFIG), then ``overrides``.

    With a config file, relative paths from the file and the default file
    names resolve against the file's directory; override paths are used as
    given.
    """
    cfg = defaults()
    if path is None:
        path = os.environ.get(ENV_VAR) or None
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        from_file = parse_config(p.read_text(encoding="utf-8"), str(p))
        cfg.update(from_file)
        for key in PATH_KEYS:
            if cfg[key]:
                cfg[key] = str(p.parent / cfg[key])
    for key, value in (overrides or {}).items():
        if value is not None:
            cfg[key] = coerce(key, value)
    return cfg


def dump_config(cfg: dict) -> str:
    lines = []
    for key, (_, help_text) in KEYS.items():
        value = cfg.get(key, KEYS[key][0])
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"# {help_text}\n{key} = {value}")
    return "\n".join(lines) + "\n"
