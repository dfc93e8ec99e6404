"""Cluster-based beam search.

Each step extends every live hypothesis by its ``2 * beam_width`` best next
tokens, drops children with a repeated n-gram or ``<unk>``, clusters the pool
with K-means on each child's mean token embedding, and keeps the best
``beam_width // clusters`` children of every cluster.  Chosen children that end
in ``<eos>`` are finished; the rest form the next beam.

A scorer is any object with

* ``initial_state()`` -> opaque state
* ``step(state, token)`` -> ``(state, logprobs)`` over the vocabulary for the
  token following ``token``
* ``embedding(token)`` -> 1-D array used as the clustering feature
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Protocol, Sequence

import numpy as np

from .nn import NumericError

KMEANS_MAX_ITER = 20
KMEANS_TOL = 1e-6


class DecodeError(RuntimeError):
    pass


class Scorer(Protocol):
    def initial_state(self) -> Any: ...

    def step(self, state: Any, token: int) -> tuple[Any, np.ndarray]: ...

    def embedding(self, token: int) -> np.ndarray: ...


@dataclass(frozen=True)
class BeamConfig:
    beam_width: int = 4
    clusters: int = 2
    t_max: int = 12
    ngram_block: int = 2
    length_norm: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.beam_width < 1:
            raise ValueError("beam_width must be >= 1")
        if not 1 <= self.clusters <= self.beam_width:
            raise ValueError("clusters must lie in [1, beam_width]")
        if self.beam_width % self.clusters:
            raise ValueError("beam_width must be a multiple of clusters")
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")
        if self.ngram_block < 2:
            raise ValueError("ngram_block must be >= 2")


@dataclass
class Hypothesis:
    tokens: tuple[int, ...]
    logprob: float
    emb_sum: np.ndarray
    complete: bool = False
    # Recurrent state after consuming all of ``tokens``; None until advanced.
    state: Any = field(default=None, repr=False)
    next_logprobs: np.ndarray | None = field(default=None, repr=False)
    parent_state: Any = field(default=None, repr=False)

    @property
    def mean_emb(self) -> np.ndarray:
        return self.emb_sum / len(self.tokens)

    def score(self, length_norm: bool = False) -> float:
        return self.logprob / len(self.tokens) if length_norm else self.logprob

    def sort_key(self, length_norm: bool = False):
        return (-self.score(length_norm), self.tokens)


def _check_distribution(logprobs: np.ndarray) -> None:
    finite = logprobs[np.isfinite(logprobs)]
    if finite.size == 0 or np.any(np.isnan(logprobs)) or np.any(logprobs > 1e-9):
        raise NumericError("scorer returned an invalid log-distribution")
    total = np.logaddexp.reduce(finite)
    if abs(total) > 1e-6:
        raise NumericError(f"scorer log-probabilities sum to exp({total:.3g}), not 1")


def constrain_eos(logprobs: np.ndarray, length: int, eos_id: int | None,
                  min_len: int, max_len: int | None) -> np.ndarray:
    """Apply length bounds to a next-token log-distribution.

    Before ``min_len`` the end symbol gets probability 0 and the rest is
    renormalised; at ``max_len`` the end symbol gets probability 1.
    """
    if eos_id is None:
        return logprobs
    if max_len is not None and length >= max_len:
        out = np.full_like(logprobs, -np.inf)
        out[eos_id] = 0.0
        return out
    if length < min_len:
        out = logprobs.copy()
        out[eos_id] = -np.inf
        rest = np.logaddexp.reduce(out[np.isfinite(out)]) if np.isfinite(out).any() else -np.inf
        if not np.isfinite(rest):
            raise DecodeError("no continuation other than <eos> has probability mass")
        return out - rest
    return logprobs


def extend(hyps: Sequence[Hypothesis], scorer: Scorer, beam_width: int, *,
           eos_id: int | None = None, min_len: int = 1,
           max_len: int | None = None) -> list[Hypothesis]:
    """Children of every live hypothesis from its top ``2 * beam_width`` tokens."""
    pool = []
    n_top = 2 * beam_width
    for hyp in hyps:
        if hyp.complete:
            raise ValueError("cannot extend a complete hypothesis")
        _advance(hyp, scorer)
        _check_distribution(hyp.next_logprobs)
        length = len(hyp.tokens)
        lp = constrain_eos(hyp.next_logprobs, length, eos_id, min_len, max_len)
        candidates = np.flatnonzero(np.isfinite(lp))
        # stable sort: ties resolved toward the smaller token id
        order = candidates[np.argsort(-lp[candidates], kind="stable")][:n_top]
        for tok in order:
            tok = int(tok)
            tokens = hyp.tokens + (tok,)
            done = (tok == eos_id) if eos_id is not None else (
                max_len is not None and len(tokens) >= max_len)
            pool.append(Hypothesis(
                tokens=tokens,
                logprob=hyp.logprob + float(lp[tok]),
                emb_sum=hyp.emb_sum + scorer.embedding(tok),
                complete=done,
                parent_state=hyp.state,
            ))
    return pool


def _advance(hyp: Hypothesis, scorer: Scorer) -> None:
    if hyp.next_logprobs is None:
        hyp.state, hyp.next_logprobs = scorer.step(hyp.parent_state, hyp.tokens[-1])
        hyp.parent_state = None


def has_repeated_ngram(tokens: Sequence[int], n: int) -> bool:
    """True if the final n-gram of ``tokens`` already occurs earlier in it."""
    if len(tokens) <= n:
        return False
    last = tuple(tokens[-n:])
    return any(tuple(tokens[i:i + n]) == last for i in range(len(tokens) - n))


def prune_invalid(pool: Sequence[Hypothesis], n: int, unk_id: int | None) -> list[Hypothesis]:
    return [h for h in pool
            if not has_repeated_ngram(h.tokens, n)
            and (unk_id is None or unk_id not in h.tokens)]


def kmeans(points, k: int, seed=0) -> np.ndarray:
    """Lloyd's algorithm with k-means++ seeding; returns one label per point.

    Every one of the ``min(k, n)`` clusters is non-empty on return.  With
    fewer points than ``k`` each point is its own cluster.
    """
    X = np.asarray(points, dtype=np.float64)
    n = X.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if n <= k:
        return np.arange(n)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    centers = [int(rng.integers(n))]
    d2 = np.sum((X - X[centers[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            free = np.setdiff1d(np.arange(n), centers)
            nxt = int(free[rng.integers(len(free))])
        centers.append(nxt)
        d2 = np.minimum(d2, np.sum((X - X[nxt]) ** 2, axis=1))
    C = X[centers].copy()

    labels = np.zeros(n, dtype=int)
    for _ in range(KMEANS_MAX_ITER):
        dist = np.sum((X[:, None, :] - C[None, :, :]) ** 2, axis=2)
        labels = np.argmin(dist, axis=1)
        new_C = C.copy()
        for j in range(k):
            members = labels == j
            if members.any():
                new_C[j] = X[members].mean(axis=0)
            else:
                far = int(np.argmax(dist[np.arange(n), labels]))
                new_C[j] = X[far]
        moved = float(np.max(np.sqrt(np.sum((new_C - C) ** 2, axis=1))))
        C = new_C
        if moved < KMEANS_TOL:
            break
    dist = np.sum((X[:, None, :] - C[None, :, :]) ** 2, axis=2)
    labels = np.argmin(dist, axis=1)
    return _fill_empty(labels, dist, k)


def _fill_empty(labels: np.ndarray, dist: np.ndarray, k: int) -> np.ndarray:
    labels = labels.copy()
    n = len(labels)
    for j in range(k):
        if np.any(labels == j):
            continue
        sizes = np.bincount(labels, minlength=k)
        movable = sizes[labels] > 1
        own = np.where(movable, dist[np.arange(n), labels], -np.inf)
        labels[int(np.argmax(own))] = j
    return labels


def select_survivors(pool: Sequence[Hypothesis], cfg: BeamConfig, rng) -> list[Hypothesis]:
    """Per-cluster top ``beam_width // clusters``; unused quota goes to the best leftovers."""
    if not pool:
        return []
    quota = cfg.beam_width // cfg.clusters
    key = lambda h: h.sort_key(cfg.length_norm)  # noqa: E731
    if cfg.clusters == 1:
        return sorted(pool, key=key)[:cfg.beam_width]
    labels = kmeans(np.stack([h.mean_emb for h in pool]), cfg.clusters, rng)
    chosen_idx = []
    for c in range(int(labels.max()) + 1):
        members = sorted(np.flatnonzero(labels == c), key=lambda i: key(pool[i]))
        chosen_idx.extend(members[:quota])
    spare = cfg.beam_width - len(chosen_idx)
    if spare > 0:
        taken = set(chosen_idx)
        rest = sorted((i for i in range(len(pool)) if i not in taken), key=lambda i: key(pool[i]))
        chosen_idx.extend(rest[:spare])
    return sorted((pool[i] for i in chosen_idx), key=key)


def cbs_decode(init: Sequence[int], scorer: Scorer, cfg: BeamConfig, *,
               eos_id: int | None = None, unk_id: int | None = None,
               min_len: int = 1, max_len: int | None = None) -> list[Hypothesis]:
    """Decode from the prefix ``init``; returns finished hypotheses, best first.

    Lengths count tokens including ``init`` and excluding ``<eos>``.  Without
    an ``eos_id`` a hypothesis finishes on reaching ``max_len`` tokens.
    """
    if not init:
        raise ValueError("init prefix must be non-empty")
    if max_len is not None and min_len > max_len:
        raise ValueError(f"min_len {min_len} > max_len {max_len}")
    if eos_id is None and max_len is None:
        raise ValueError("need eos_id or max_len to terminate hypotheses")
    rng = np.random.default_rng(cfg.seed)

    state = scorer.initial_state()
    emb_sum = 0.0
    lp = None
    for tok in init:
        state, lp = scorer.step(state, tok)
        emb_sum = emb_sum + scorer.embedding(tok)
    root = Hypothesis(tuple(int(t) for t in init), 0.0, np.asarray(emb_sum, dtype=np.float64),
                      state=state, next_logprobs=lp)
    if eos_id is None and len(root.tokens) >= max_len:
        raise ValueError("init prefix already reaches max_len")

    live = [root]
    finished: list[Hypothesis] = []
    for _ in range(cfg.t_max):
        if len(finished) >= cfg.beam_width or not live:
            break
        pool = extend(live, scorer, cfg.beam_width, eos_id=eos_id,
                      min_len=min_len, max_len=max_len)
        pool = prune_invalid(pool, cfg.ngram_block, unk_id)
        survivors = select_survivors(pool, cfg, rng)
        finished.extend(h for h in survivors if h.complete)
        live = [h for h in survivors if not h.complete]

    if not finished:
        raise DecodeError("no complete hypothesis survived decoding")
    finished.sort(key=lambda h: h.sort_key(cfg.length_norm))
    return finished


def distinct_n(sequences, n: int = 2) -> float:
    """Unique n-grams over total n-grams across a set of token sequences."""
    grams = [tuple(s[i:i + n]) for s in sequences for i in range(len(s) - n + 1)]
    return len(set(grams)) / len(grams) if grams else 0.0


def strip_eos(tokens: Sequence[int], eos_id: int | None) -> tuple[int, ...]:
    if eos_id is not None and tokens and tokens[-1] == eos_id:
        return tuple(tokens[:-1])
    return tuple(tokens)
