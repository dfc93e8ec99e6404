"""Three-stage generation: head selection, antecedent LM, S2S subsequent, re-rank."""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cbs import BeamConfig, DecodeError
from .config import ConfigError
from .heads import HeadPosterior, select_heads
from .lm import LanguageModel
from .nn import load_checkpoint, params_from_tensors
from .rerank import Candidate, RankWeights, ScoredCouplet, SentimentLexicon, ToneLexicon, rerank
from .s2s import AttentionS2S
from .vocab import Vocab

log = logging.getLogger(__name__)


class GenerationError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


@dataclass(frozen=True)
class GenerationResult:
    heads: tuple[str, str]
    best: ScoredCouplet
    pool: list

    def to_dict(self) -> dict:
        best = self.best.to_dict()
        return {
            "heads": list(self.heads),
            "best": {"antecedent": best["antecedent"], "subsequent": best["subsequent"],
                     "scores": best["scores"]},
            "candidates": [c.to_dict() for c in self.pool],
        }


class GenerationLog:
    """Append-only JSON-lines record of requests; appends are serialised."""

    def __init__(self, path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, user_input: str, result: GenerationResult) -> None:
        record = {"timestamp": time.time(), "input": user_input, **result.to_dict()}
        line = json.dumps(record, ensure_ascii=False, sort_keys=True)
        with self._lock, open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")


def file_id(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


class Pipeline:
    def __init__(self, vocab: Vocab, lm: LanguageModel, lm_params, s2s: AttentionS2S, s2s_params,
                 posterior: HeadPosterior, tones: ToneLexicon, sentiment: SentimentLexicon, *,
                 weights: RankWeights = RankWeights(), lm_beam: BeamConfig = BeamConfig(),
                 s2s_beam: BeamConfig = BeamConfig(), n_antecedents: int = 4,
                 n_subsequents: int = 4, sample_heads: bool = False, seed: int = 0,
                 generation_log: GenerationLog | None = None, model_ids: dict | None = None):
        if lm.vocab_size != len(vocab) or s2s.vocab_size != len(vocab):
            raise ConfigError("checkpoint vocabulary size does not match the vocabulary file")
        self.vocab = vocab
        self.lm, self.lm_params = lm, lm_params
        self.s2s, self.s2s_params = s2s, s2s_params
        self.posterior = posterior
        self.tones = tones
        self.sentiment = sentiment
        self.weights = weights
        self.lm_beam = lm_beam
        self.s2s_beam = s2s_beam
        self.n_antecedents = n_antecedents
        self.n_subsequents = n_subsequents
        self.sample_heads = sample_heads
        self.seed = seed
        self.generation_log = generation_log
        self.model_ids = model_ids or {}

    @classmethod
    def from_config(cls, cfg: dict) -> "Pipeline":
        for key in ("vocab", "lm_checkpoint", "s2s_checkpoint", "head_table"):
            if not cfg.get(key) or not Path(cfg[key]).is_file():
                raise ConfigError(f"missing file for {key}: {cfg.get(key) or '(unset)'}")
        for key in ("tone_lexicon", "sentiment_lexicon"):
            if cfg.get(key) and not Path(cfg[key]).is_file():
                raise ConfigError(f"missing file for {key}: {cfg[key]}")
        vocab = Vocab.load(cfg["vocab"])
        lm_tensors = load_checkpoint(cfg["lm_checkpoint"])
        s2s_tensors = load_checkpoint(cfg["s2s_checkpoint"])
        lm = LanguageModel.from_tensors(lm_tensors, vocab.eos, vocab.unk,
                                        cfg["min_len"], cfg["max_len"])
        s2s = AttentionS2S.from_tensors(s2s_tensors, vocab.eos, vocab.unk)
        beam = BeamConfig(cfg["beam_width"], cfg["clusters"], cfg["max_len"],
                          cfg["ngram_block"], cfg["length_norm"], cfg["seed"])
        weights = RankWeights(cfg["w_length"], cfg["w_repeat"], cfg["w_tone"], cfg["w_sentiment"])
        return cls(
            vocab, lm, params_from_tensors(lm_tensors), s2s, params_from_tensors(s2s_tensors),
            HeadPosterior.load(cfg["head_table"]),
            ToneLexicon.load(cfg["tone_lexicon"] or None),
            SentimentLexicon.load(cfg["sentiment_lexicon"] or None),
            weights=weights, lm_beam=beam, s2s_beam=beam,
            n_antecedents=cfg["antecedent_candidates"],
            n_subsequents=cfg["subsequent_candidates"],
            sample_heads=cfg["sample_heads"], seed=cfg["seed"],
            generation_log=GenerationLog(cfg["log"]) if cfg.get("log") else None,
            model_ids={"lm": file_id(cfg["lm_checkpoint"]),
                       "s2s": file_id(cfg["s2s_checkpoint"])},
        )

    @property
    def pool_size(self) -> int:
        return self.n_antecedents * self.n_subsequents

    def select_heads(self, user_input: str) -> tuple[str, str]:
        rng = None
        if self.sample_heads:
            rng = np.random.default_rng([self.seed, *map(ord, user_input.strip())])
        return select_heads(user_input, self.posterior, self.vocab,
                            sample=self.sample_heads, rng=rng)

    def candidates(self, k1: str, k2: str) -> list[Candidate]:
        v = self.vocab
        for ch in (k1, k2):
            if ch not in v:
                raise GenerationError("heads", f"head character {ch!r} is not in the vocabulary")
        try:
            antecedents = self.lm.generate(self.lm_params, v.char_to_id[k1],
                                           self.lm_beam)[:self.n_antecedents]
        except DecodeError as exc:
            raise GenerationError("antecedent", str(exc)) from exc
        pool = []
        for tokens, lp1 in antecedents:
            try:
                subsequents = self.s2s.generate(self.s2s_params, tokens, v.char_to_id[k2],
                                                self.s2s_beam)[:self.n_subsequents]
            except DecodeError as exc:
                log.info("no subsequent for %s: %s", v.decode(tokens), exc)
                continue
            first = v.decode(tokens)
            pool.extend(Candidate(first, v.decode(sub), lp1 + lp2) for sub, lp2 in subsequents)
        if not pool:
            raise GenerationError("subsequent", "no subsequent clause could be generated")
        return pool

    def generate_from_heads(self, k1: str, k2: str) -> tuple[ScoredCouplet, list]:
        ranked = rerank(self.candidates(k1, k2), self.weights, self.tones, self.sentiment)
        return ranked[0], ranked

    def generate_pair(self, k1: str, k2: str) -> tuple[str, str]:
        best, _ = self.generate_from_heads(k1, k2)
        return best.antecedent, best.subsequent

    def run_generate(self, user_input: str) -> GenerationResult:
        heads = self.select_heads(user_input)
        best, ranked = self.generate_from_heads(*heads)
        result = GenerationResult(heads, best, ranked)
        if self.generation_log is not None:
            self.generation_log.append(user_input.strip(), result)
        return result
