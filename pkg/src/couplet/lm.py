"""Character-level recurrent language model for the first (antecedent) clause."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .cbs import BeamConfig, cbs_decode, strip_eos
from .cells import (CELL_KINDS, StackSpec, infer_stack_spec, init_stack, stack_step,
                    stack_step_backward, zero_dstate, zero_state)
from .nn import INIT_SCALE, ParamSet, ShapeError, log_softmax, softmax_xent, uniform_init
from .training import TrainConfig, TrainResult, train


@dataclass(frozen=True)
class LMConfig:
    cell_kind: str = "lstm"
    layers: int = 2
    hidden: int = 64
    embedding_dim: int = 32
    min_len: int = 5
    max_len: int = 12

    def __post_init__(self):
        if self.layers < 1 or self.hidden < 1 or self.embedding_dim < 1:
            raise ValueError(f"invalid LM dimensions {self}")
        if not 1 <= self.min_len <= self.max_len:
            raise ValueError("need 1 <= min_len <= max_len")
        if self.cell_kind not in CELL_KINDS:
            raise ValueError(f"cell_kind must be one of {CELL_KINDS}, got {self.cell_kind!r}")


FULL_LM_CONFIG = LMConfig(layers=2, hidden=1000, embedding_dim=256)


class LanguageModel:
    prefix = "lm"

    def __init__(self, config: LMConfig, vocab_size: int, eos_id: int, unk_id: int | None = None):
        self.config = config
        self.vocab_size = vocab_size
        self.eos_id = eos_id
        self.unk_id = unk_id
        self.stack = StackSpec(f"{self.prefix}.rnn", config.cell_kind, config.layers,
                               config.hidden, config.embedding_dim)

    @classmethod
    def from_tensors(cls, tensors, eos_id: int, unk_id: int | None = None,
                     min_len: int = 5, max_len: int = 12) -> "LanguageModel":
        stack = infer_stack_spec(tensors, f"{cls.prefix}.rnn")
        vocab_size, emb = tensors[f"{cls.prefix}.emb"].shape
        cfg = LMConfig(stack.kind, stack.layers, stack.hidden, emb, min_len, max_len)
        return cls(cfg, vocab_size, eos_id, unk_id)

    def init_params(self, rng, scale: float = INIT_SCALE) -> ParamSet:
        p = ParamSet()
        uniform_init(p, f"{self.prefix}.emb", (self.vocab_size, self.config.embedding_dim), rng, scale)
        init_stack(p, self.stack, rng, scale)
        uniform_init(p, f"{self.prefix}.out.w", (self.vocab_size, self.config.hidden), rng, scale)
        uniform_init(p, f"{self.prefix}.out.b", (1, self.vocab_size), rng, scale)
        return p

    def initial_state(self, batch: int = 1):
        return zero_state(self.stack, batch)

    def step(self, params: ParamSet, state, char_ids):
        """One recurrent step; ``char_ids`` is an int or a length-B array."""
        ids = np.atleast_1d(np.asarray(char_ids))
        if np.any(ids < 0) or np.any(ids >= self.vocab_size):
            raise ValueError(f"token id outside vocabulary of {self.vocab_size}")
        if state[0][0].shape[0] != ids.shape[0]:
            raise ShapeError(f"state batch {state[0][0].shape[0]} != input batch {ids.shape[0]}")
        x = params[f"{self.prefix}.emb"][ids]
        state, _ = stack_step(params, self.stack, x, state)
        logits = state[-1][0] @ params[f"{self.prefix}.out.w"].T + params[f"{self.prefix}.out.b"]
        return state, logits

    @staticmethod
    def length_of(clause) -> int:
        return len(clause)

    def forward_backward(self, params: ParamSet, batch, backward: bool = True):
        """Teacher-forced loss over a batch of equal-length clauses.

        Each clause predicts its own next characters and a final ``<eos>``.
        Returns ``(summed loss, number of predictions)``; when ``backward`` the
        gradient of the mean loss is accumulated into ``params.grads``.
        """
        X = np.asarray(batch, dtype=np.int64)
        if X.ndim != 2 or X.shape[1] == 0:
            raise ValueError("batch must hold non-empty clauses of equal length")
        B, T = X.shape
        Y = np.concatenate([X[:, 1:], np.full((B, 1), self.eos_id)], axis=1)
        emb = params[f"{self.prefix}.emb"]
        Wo = params[f"{self.prefix}.out.w"]
        bo = params[f"{self.prefix}.out.b"]
        state = self.initial_state(B)
        caches, tops, dlogits = [], [], []
        total = 0.0
        for t in range(T):
            state, cache = stack_step(params, self.stack, emb[X[:, t]], state)
            h = state[-1][0]
            losses, dl = softmax_xent(h @ Wo.T + bo, Y[:, t])
            total += float(losses.sum())
            caches.append(cache)
            tops.append(h)
            dlogits.append(dl)
        n = B * T
        if backward:
            scale = 1.0 / n
            dstate = zero_dstate(self.stack, B)
            g_emb = params.grads[f"{self.prefix}.emb"]
            for t in reversed(range(T)):
                dl = dlogits[t] * scale
                params.grads[f"{self.prefix}.out.w"] += dl.T @ tops[t]
                params.grads[f"{self.prefix}.out.b"] += dl.sum(axis=0, keepdims=True)
                dstate[-1][0] = dstate[-1][0] + dl @ Wo
                dx, dstate = stack_step_backward(params, self.stack, caches[t], dstate)
                np.add.at(g_emb, X[:, t], dx)
        return total, n

    def sequence_loss(self, params: ParamSet, clause) -> float:
        if len(clause) == 0:
            raise ValueError("clause must be non-empty")
        total, n = self.forward_backward(params, [list(clause)], backward=False)
        return total / n

    def scorer(self, params: ParamSet) -> "LMScorer":
        return LMScorer(self, params)

    def generate(self, params: ParamSet, head: int, beam: BeamConfig):
        """Ranked ``(tokens, logprob)`` clauses starting with ``head``."""
        if head in (self.unk_id, self.eos_id) or not 0 <= head < self.vocab_size:
            raise ValueError(f"head token {head} is not a usable character")
        cfg = self.config
        beam = dataclasses.replace(beam, t_max=max(beam.t_max, cfg.max_len))
        hyps = cbs_decode([head], self.scorer(params), beam, eos_id=self.eos_id,
                          unk_id=self.unk_id, min_len=cfg.min_len, max_len=cfg.max_len)
        return [(strip_eos(h.tokens, self.eos_id), h.logprob) for h in hyps]


class LMScorer:
    def __init__(self, model: LanguageModel, params: ParamSet):
        self.model = model
        self.params = params
        self._emb = params[f"{model.prefix}.emb"]

    def initial_state(self):
        return self.model.initial_state(1)

    def step(self, state, token):
        state, logits = self.model.step(self.params, state, token)
        return state, log_softmax(logits[0])

    def embedding(self, token):
        return self._emb[token]


def lm_step(model: LanguageModel, state, char_id: int, params: ParamSet):
    return model.step(params, state, char_id)


def lm_sequence_loss(model: LanguageModel, clause, params: ParamSet) -> float:
    return model.sequence_loss(params, clause)


def train_lm(split, config: LMConfig, hyper: TrainConfig, seed: int, vocab) -> tuple[LanguageModel, TrainResult]:
    """Train on the antecedent clauses of ``split`` (lists of CoupletPair)."""
    model = LanguageModel(config, len(vocab), vocab.eos, vocab.unk)
    train_items = [list(p.antecedent) for p in split.train]
    val_items = [list(p.antecedent) for p in split.validation]
    return model, train(model, train_items, val_items, hyper, seed)


def generate_antecedent(model: LanguageModel, head: int, params: ParamSet, beam: BeamConfig):
    return model.generate(params, head, beam)
