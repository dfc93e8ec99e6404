"""Command-line entry point: ``couplet <subcommand> [--config FILE] [--key value ...]``."""

from __future__ import annotations

import argparse
import logging
import sys
import unicodedata
from pathlib import Path

from .config import KEYS, ConfigError, dump_config, load_config
from .heads import fit_head_model
from .lm import LMConfig, train_lm
from .metrics import EvaluationError, evaluate_testset
from .nn import TrainingError, save_checkpoint
from .pipeline import GenerationError, Pipeline
from .s2s import S2SConfig, train_s2s
from .synthetic import toy_corpus
from .training import TrainConfig
from .vocab import (CoupletPair, DatasetSplit, build_vocab, collect_head_stats,
                    load_corpus, make_splits, write_corpus)

log = logging.getLogger("couplet")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file (default: $COUPLET_CONFIG)")
    for key, (default, help_text) in KEYS.items():
        flag = "--" + key.replace("_", "-")
        kind = type(default)
        p.add_argument(flag, dest=f"cfg_{key}", default=None,
                       type=str if kind is bool else kind,
                       help=f"{help_text} (default: {default!r})")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="couplet", description="Acrostic couplet generator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("toy-corpus", help="write a synthetic corpus")
    p.add_argument("output")
    p.add_argument("-n", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("show-config", help="print the effective configuration")
    _add_config_flags(p)
    for name, help_text in [("train-lm", "train the antecedent language model"),
                            ("train-s2s", "train the attention encoder-decoder"),
                            ("fit-heads", "fit the head-character posterior table"),
                            ("eval", "evaluate on the held-out test split")]:
        _add_config_flags(sub.add_parser(name, help=help_text))

    p = sub.add_parser("generate", help="generate a couplet from a 4-character input")
    p.add_argument("--input", required=True)
    _add_config_flags(p)

    p = sub.add_parser("serve", help="serve the JSON endpoint")
    p.add_argument("--bind", default="127.0.0.1:8000", help="host:port")
    _add_config_flags(p)
    return parser


def _config_from_args(args) -> dict:
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_")}
    return load_config(args.config, overrides)


def _split(cfg: dict) -> tuple[DatasetSplit, int]:
    if not cfg["corpus"]:
        raise ConfigError("no corpus configured")
    if not Path(cfg["corpus"]).is_file():
        raise ConfigError(f"missing file for corpus: {cfg['corpus']}")
    pairs, skipped = load_corpus(cfg["corpus"])
    if not pairs:
        raise ConfigError(f"corpus {cfg['corpus']} has no usable pairs")
    val_n = None if cfg["val_n"] < 0 else cfg["val_n"]
    test_n = None if cfg["test_n"] < 0 else cfg["test_n"]
    return make_splits(pairs, val_n, test_n, cfg["seed"]), skipped


def _encoded_split(cfg: dict):
    split, skipped = _split(cfg)
    vocab = build_vocab(split.train + split.validation + split.test, cfg["min_freq"])
    vocab.save(cfg["vocab"])
    enc = lambda ps: [CoupletPair.from_text(a, b, vocab) for a, b in ps]  # noqa: E731
    print(f"corpus: {len(split.train)} train / {len(split.validation)} val / "
          f"{len(split.test)} test, {skipped} skipped; vocab {len(vocab)}")
    return DatasetSplit(enc(split.train), enc(split.validation), enc(split.test), split.seed), vocab


def _train_config(cfg: dict) -> TrainConfig:
    return TrainConfig(cfg["epochs"], cfg["batch_size"], cfg["lr"], cfg["lr_decay"],
                       cfg["clip"], cfg["clip_mode"], cfg["init_scale"])


def _report_history(result) -> None:
    for h in result.history:
        print(f"epoch {h['epoch']:3d}  train {h['train_loss']:.4f}  val {h['val_loss']:.4f}")
    print(f"best epoch {result.best_epoch}")


def cmd_train_lm(cfg: dict) -> None:
    split, vocab = _encoded_split(cfg)
    config = LMConfig(cfg["cell"], cfg["lm_layers"], cfg["hidden"], cfg["embedding"],
                      cfg["min_len"], cfg["max_len"])
    _, result = train_lm(split, config, _train_config(cfg), cfg["seed"], vocab)
    save_checkpoint(cfg["lm_checkpoint"], result.params)
    _report_history(result)
    print(f"wrote {cfg['lm_checkpoint']}")


def cmd_train_s2s(cfg: dict) -> None:
    split, vocab = _encoded_split(cfg)
    config = S2SConfig(cfg["cell"], cfg["s2s_layers"], cfg["hidden"], cfg["embedding"],
                       cfg["attention"])
    _, result = train_s2s(split, config, _train_config(cfg), cfg["seed"], vocab)
    save_checkpoint(cfg["s2s_checkpoint"], result.params)
    _report_history(result)
    print(f"wrote {cfg['s2s_checkpoint']}")


def cmd_fit_heads(cfg: dict) -> None:
    split, _ = _split(cfg)
    posterior = fit_head_model(collect_head_stats(split.train), cfg["head_alpha"])
    posterior.save(cfg["head_table"])
    print(f"wrote {cfg['head_table']} ({len(posterior.probs)} characters)")


def _pad(text: str, width: int) -> str:
    shown = sum(2 if unicodedata.east_asian_width(ch) in "WF" else 1 for ch in text)
    return text + " " * max(0, width - shown)


def format_pool(pool) -> str:
    lines = [f"{'#':>2}  {_pad('antecedent', 24)} {_pad('subsequent', 24)} "
             f"{'len':>5} {'rep':>5} {'tone':>5} {'sent':>5} {'total':>6} {'logprob':>8}"]
    for i, c in enumerate(pool, 1):
        lines.append(f"{i:>2}  {_pad(c.antecedent, 24)} {_pad(c.subsequent, 24)} "
                     f"{c.s_l:5.2f} {c.s_r:5.2f} {c.s_t:5.2f} {c.s_s:5.2f} "
                     f"{c.total:6.3f} {c.logprob:8.3f}")
    return "\n".join(lines)


def cmd_generate(cfg: dict, text: str) -> None:
    pipeline = Pipeline.from_config(cfg)
    result = pipeline.run_generate(text)
    print(f"heads: {result.heads[0]} {result.heads[1]}")
    print(f"best:  {result.best.antecedent} / {result.best.subsequent}")
    print(format_pool(result.pool))


def cmd_eval(cfg: dict) -> None:
    split, _ = _split(cfg)
    if not split.test:
        raise ConfigError("test split is empty; set test_n")
    pipeline = Pipeline.from_config(cfg)
    report = evaluate_testset(pipeline, split.test, pipeline.tones)
    print(report.table())
    print(report.summary())


def cmd_serve(cfg: dict, bind: str) -> None:
    from .service import serve

    host, _, port = bind.rpartition(":")
    pipeline = Pipeline.from_config(cfg)
    serve(pipeline, host or "127.0.0.1", int(port))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "toy-corpus":
            write_corpus(args.output, toy_corpus(args.n, args.seed))
            print(f"wrote {args.n} pairs to {args.output}")
            return 0
        cfg = _config_from_args(args)
        if args.command == "show-config":
            sys.stdout.write(dump_config(cfg))
        elif args.command == "train-lm":
            cmd_train_lm(cfg)
        elif args.command == "train-s2s":
            cmd_train_s2s(cfg)
        elif args.command == "fit-heads":
            cmd_fit_heads(cfg)
        elif args.command == "generate":
            cmd_generate(cfg, args.input)
        elif args.command == "eval":
            cmd_eval(cfg)
        elif args.command == "serve":
            cmd_serve(cfg, args.bind)
    except (ConfigError, GenerationError, EvaluationError, TrainingError, ValueError, OSError) as exc:
        print(f"couplet {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
