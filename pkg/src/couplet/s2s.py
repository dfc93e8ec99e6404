"""Attention encoder-decoder producing the second (subsequent) clause.

The encoder is a unidirectional recurrent stack over the first clause.  At
each decoder step, additive attention scores every encoder state against the
previous top decoder state, the weighted sum of encoder states (the context)
is concatenated with the previous character's embedding, and the result
drives the decoder stack.  The decoder starts from the final encoder state.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .cbs import BeamConfig, cbs_decode, strip_eos
from .cells import (CELL_KINDS, StackSpec, infer_stack_spec, init_stack, stack_step,
                    stack_step_backward, zero_dstate, zero_state)
from .nn import INIT_SCALE, ParamSet, ShapeError, log_softmax, softmax, softmax_xent, uniform_init
from .training import TrainConfig, TrainResult, train


@dataclass(frozen=True)
class S2SConfig:
    cell_kind: str = "lstm"
    layers: int = 2
    hidden: int = 64
    embedding_dim: int = 32
    attention_dim: int = 64

    def __post_init__(self):
        if min(self.layers, self.hidden, self.embedding_dim, self.attention_dim) < 1:
            raise ValueError(f"invalid S2S dimensions {self}")
        if self.cell_kind not in CELL_KINDS:
            raise ValueError(f"cell_kind must be one of {CELL_KINDS}, got {self.cell_kind!r}")


FULL_S2S_CONFIG = S2SConfig(layers=4, hidden=1000, embedding_dim=256, attention_dim=1000)


@dataclass
class EncoderStates:
    states: np.ndarray          # (m, hidden): top-layer state per source position
    source: tuple[int, ...]
    final: list                 # full stack state after the last source character


@dataclass
class AttnContext:
    weights: np.ndarray         # (m,)
    context: np.ndarray         # (hidden,)


class AttentionS2S:
    prefix = "s2s"

    def __init__(self, config: S2SConfig, vocab_size: int, eos_id: int, unk_id: int | None = None):
        self.config = config
        self.vocab_size = vocab_size
        self.eos_id = eos_id
        self.unk_id = unk_id
        c = config
        self.enc = StackSpec(f"{self.prefix}.enc", c.cell_kind, c.layers, c.hidden, c.embedding_dim)
        self.dec = StackSpec(f"{self.prefix}.dec", c.cell_kind, c.layers, c.hidden,
                             c.embedding_dim + c.hidden)

    @classmethod
    def from_tensors(cls, tensors, eos_id: int, unk_id: int | None = None) -> "AttentionS2S":
        enc = infer_stack_spec(tensors, f"{cls.prefix}.enc")
        vocab_size, emb = tensors[f"{cls.prefix}.enc_emb"].shape
        att = tensors[f"{cls.prefix}.att.v"].shape[1]
        cfg = S2SConfig(enc.kind, enc.layers, enc.hidden, emb, att)
        return cls(cfg, vocab_size, eos_id, unk_id)

    def n(self, part: str) -> str:
        return f"{self.prefix}.{part}"

    def init_params(self, rng, scale: float = INIT_SCALE) -> ParamSet:
        c = self.config
        p = ParamSet()
        uniform_init(p, self.n("enc_emb"), (self.vocab_size, c.embedding_dim), rng, scale)
        uniform_init(p, self.n("dec_emb"), (self.vocab_size, c.embedding_dim), rng, scale)
        init_stack(p, self.enc, rng, scale)
        init_stack(p, self.dec, rng, scale)
        uniform_init(p, self.n("att.wh"), (c.attention_dim, c.hidden), rng, scale)
        uniform_init(p, self.n("att.ws"), (c.attention_dim, c.hidden), rng, scale)
        uniform_init(p, self.n("att.v"), (1, c.attention_dim), rng, scale)
        uniform_init(p, self.n("out.w"), (self.vocab_size, c.hidden), rng, scale)
        uniform_init(p, self.n("out.b"), (1, self.vocab_size), rng, scale)
        return p

    # -- batched primitives (B = batch, m = source length, H = hidden) --

    def _encode(self, params, src: np.ndarray):
        B, m = src.shape
        state = zero_state(self.enc, B)
        caches, tops = [], []
        for j in range(m):
            state, cache = stack_step(params, self.enc, params[self.n("enc_emb")][src[:, j]], state)
            caches.append(cache)
            tops.append(state[-1][0])
        return np.stack(tops, axis=1), state, caches

    def _attend(self, params, h_prev: np.ndarray, S: np.ndarray, proj_S: np.ndarray | None = None):
        if proj_S is None:
            proj_S = S @ params[self.n("att.ws")].T
        u = np.tanh((h_prev @ params[self.n("att.wh")].T)[:, None, :] + proj_S)
        scores = u @ params[self.n("att.v")][0]
        a = softmax(scores, axis=1)
        ctx = np.einsum("bm,bmh->bh", a, S)
        return a, ctx, u

    def _attend_backward(self, params, dctx, h_prev, S, a, u, dS):
        da = np.einsum("bh,bmh->bm", dctx, S)
        dS += a[:, :, None] * dctx[:, None, :]
        de = a * (da - np.sum(a * da, axis=1, keepdims=True))
        v = params[self.n("att.v")][0]
        params.grads[self.n("att.v")] += np.einsum("bm,bma->a", de, u)[None, :]
        dpre = de[:, :, None] * v[None, None, :] * (1.0 - u * u)
        dpre_sum = dpre.sum(axis=1)
        params.grads[self.n("att.wh")] += dpre_sum.T @ h_prev
        params.grads[self.n("att.ws")] += np.einsum("bma,bmh->ah", dpre, S)
        dS += dpre @ params[self.n("att.ws")]
        return dpre_sum @ params[self.n("att.wh")]

    def _dec_step(self, params, state, tokens, ctx):
        x = np.concatenate([params[self.n("dec_emb")][tokens], ctx], axis=1)
        state, cache = stack_step(params, self.dec, x, state)
        logits = state[-1][0] @ params[self.n("out.w")].T + params[self.n("out.b")]
        return state, logits, cache

    # -- single-example operations --

    def encode(self, params: ParamSet, antecedent) -> EncoderStates:
        if len(antecedent) == 0:
            raise ValueError("antecedent must be non-empty")
        src = np.asarray([list(antecedent)], dtype=np.int64)
        self._check_ids(src)
        S, final, _ = self._encode(params, src)
        return EncoderStates(S[0], tuple(int(t) for t in antecedent), final)

    def attend(self, params: ParamSet, prev_dec_state: np.ndarray, enc: EncoderStates) -> AttnContext:
        S = np.asarray(enc.states)
        if S.ndim != 2 or S.shape[0] == 0:
            raise ValueError("attention needs at least one encoder state")
        h = np.asarray(prev_dec_state, dtype=np.float64).reshape(1, -1)
        if h.shape[1] != self.config.hidden or S.shape[1] != self.config.hidden:
            raise ShapeError("decoder/encoder state width does not match hidden size")
        a, ctx, _ = self._attend(params, h, S[None])
        return AttnContext(a[0], ctx[0])

    def decode_step(self, params: ParamSet, prev_state, prev_token: int, ctx: AttnContext):
        """Returns ``(h_t stack state, logits)`` for one decoder step."""
        tokens = np.asarray([prev_token], dtype=np.int64)
        self._check_ids(tokens)
        state, logits, _ = self._dec_step(params, prev_state, tokens, ctx.context[None, :])
        return state, logits[0]

    def _check_ids(self, ids):
        if np.any(ids < 0) or np.any(ids >= self.vocab_size):
            raise ValueError(f"token id outside vocabulary of {self.vocab_size}")

    # -- training --

    @staticmethod
    def length_of(pair) -> int:
        return len(pair.antecedent) * 1000 + len(pair.subsequent)

    def forward_backward(self, params: ParamSet, batch, backward: bool = True):
        src = np.asarray([p.antecedent for p in batch], dtype=np.int64)
        tgt = np.asarray([p.subsequent for p in batch], dtype=np.int64)
        B, T = tgt.shape
        Y = np.concatenate([tgt[:, 1:], np.full((B, 1), self.eos_id)], axis=1)
        S, state, enc_caches = self._encode(params, src)
        proj_S = S @ params[self.n("att.ws")].T
        Wo = params[self.n("out.w")]
        steps = []
        total = 0.0
        for t in range(T):
            h_prev = state[-1][0]
            a, ctx, u = self._attend(params, h_prev, S, proj_S)
            state, logits, cache = self._dec_step(params, state, tgt[:, t], ctx)
            losses, dl = softmax_xent(logits, Y[:, t])
            total += float(losses.sum())
            steps.append((h_prev, a, u, cache, state[-1][0], dl))
        n = B * T
        if not backward:
            return total, n

        scale = 1.0 / n
        E = self.config.embedding_dim
        dS = np.zeros_like(S)
        dstate = zero_dstate(self.dec, B)
        for t in reversed(range(T)):
            h_prev, a, u, cache, h_top, dl = steps[t]
            dl = dl * scale
            params.grads[self.n("out.w")] += dl.T @ h_top
            params.grads[self.n("out.b")] += dl.sum(axis=0, keepdims=True)
            dstate[-1][0] = dstate[-1][0] + dl @ Wo
            dx, dstate = stack_step_backward(params, self.dec, cache, dstate)
            np.add.at(params.grads[self.n("dec_emb")], tgt[:, t], dx[:, :E])
            dh_prev = self._attend_backward(params, dx[:, E:], h_prev, S, a, u, dS)
            dstate[-1][0] = dstate[-1][0] + dh_prev
        for j in reversed(range(src.shape[1])):
            dstate[-1][0] = dstate[-1][0] + dS[:, j]
            dx, dstate = stack_step_backward(params, self.enc, enc_caches[j], dstate)
            np.add.at(params.grads[self.n("enc_emb")], src[:, j], dx)
        return total, n

    def sequence_loss(self, params: ParamSet, pair) -> float:
        total, n = self.forward_backward(params, [pair], backward=False)
        return total / n

    # -- generation --

    def scorer(self, params: ParamSet, antecedent) -> "S2SScorer":
        return S2SScorer(self, params, self.encode(params, antecedent))

    def generate(self, params: ParamSet, antecedent, head: int, beam: BeamConfig):
        """Ranked ``(tokens, logprob)`` clauses of exactly ``len(antecedent)`` characters."""
        if len(antecedent) == 0:
            raise ValueError("antecedent must be non-empty")
        if head in (self.unk_id, self.eos_id) or not 0 <= head < self.vocab_size:
            raise ValueError(f"head token {head} is not a usable character")
        m = len(antecedent)
        beam = dataclasses.replace(beam, t_max=max(beam.t_max, m))
        hyps = cbs_decode([head], self.scorer(params, antecedent), beam, eos_id=self.eos_id,
                          unk_id=self.unk_id, min_len=m, max_len=m)
        return [(strip_eos(h.tokens, self.eos_id), h.logprob) for h in hyps]

    def greedy(self, params: ParamSet, antecedent, head: int) -> list[int]:
        """Argmax decode of a same-length clause (no search, no pruning)."""
        scorer = self.scorer(params, antecedent)
        state = scorer.initial_state()
        out = [head]
        while len(out) < len(antecedent):
            state, lp = scorer.step(state, out[-1])
            lp = lp.copy()
            lp[self.eos_id] = -np.inf
            out.append(int(np.argmax(lp)))
        return out


class S2SScorer:
    def __init__(self, model: AttentionS2S, params: ParamSet, enc: EncoderStates):
        self.model = model
        self.params = params
        self.enc = enc
        self._S = enc.states[None]
        self._proj = self._S @ params[model.n("att.ws")].T
        self._emb = params[model.n("dec_emb")]

    def initial_state(self):
        return self.enc.final

    def step(self, state, token):
        m = self.model
        a, ctx, _ = m._attend(self.params, state[-1][0], self._S, self._proj)
        state, logits, _ = m._dec_step(self.params, state, np.asarray([token]), ctx)
        return state, log_softmax(logits[0])

    def embedding(self, token):
        return self._emb[token]


def train_s2s(split, config: S2SConfig, hyper: TrainConfig, seed: int, vocab) -> tuple[AttentionS2S, TrainResult]:
    model = AttentionS2S(config, len(vocab), vocab.eos, vocab.unk)
    return model, train(model, list(split.train), list(split.validation), hyper, seed)


def generate_subsequent(model: AttentionS2S, antecedent, head: int, params: ParamSet, beam: BeamConfig):
    return model.generate(params, antecedent, head, beam)


def char_accuracy(model: AttentionS2S, params: ParamSet, pairs) -> float:
    """Fraction of non-head characters reproduced by greedy decoding from the gold head."""
    hit = total = 0
    for p in pairs:
        out = model.greedy(params, p.antecedent, p.subsequent[0])
        hit += sum(a == b for a, b in zip(out[1:], p.subsequent[1:]))
        total += len(p.subsequent) - 1
    return hit / total if total else 1.0
