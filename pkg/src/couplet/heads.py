"""Choosing the two clause-initial characters from a four-character request.

A character's score is the smoothed probability that an occurrence of it
heads an antecedent clause, estimated from corpus counts by Bayes' rule:
P(head | char) = P(head) P(char | head) / P(char), which reduces to
head_count / total_count before smoothing.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

INPUT_LENGTH = 4


class SelectionError(ValueError):
    pass


@dataclass(frozen=True)
class HeadPosterior:
    probs: dict
    counts: dict            # char -> (total, head)
    alpha: float = 1.0

    def p(self, ch: str) -> float:
        return self.probs.get(ch, 0.0)

    def total(self, ch: str) -> int:
        return self.counts.get(ch, (0, 0))[0]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"#alpha\t{self.alpha!r}\n")
            for ch in sorted(self.probs, key=lambda c: (-self.probs[c], ord(c))):
                total, head = self.counts[ch]
                fh.write(f"{ch}\t{self.probs[ch]!r}\t{head}\t{total}\n")

    @classmethod
    def load(cls, path) -> "HeadPosterior":
        probs, counts, alpha = {}, {}, 1.0
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line:
                continue
            fields = line.split("\t")
            if fields[0] == "#alpha":
                alpha = float(fields[1])
                continue
            ch, p, head, total = fields
            probs[ch] = float(p)
            counts[ch] = (int(total), int(head))
        return cls(probs, counts, alpha)


def fit_head_model(stats, alpha: float = 1.0) -> HeadPosterior:
    """``stats`` maps char -> (total count, antecedent-head count)."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    probs = {}
    counts = {}
    for ch, (total, head) in stats.items():
        if head > total:
            raise ValueError(f"head count exceeds total for {ch!r}")
        if total == 0:
            continue
        probs[ch] = (head + alpha) / (total + 2 * alpha)
        counts[ch] = (int(total), int(head))
    return HeadPosterior(probs, counts, alpha)


def select_heads(user_input: str, posterior: HeadPosterior, vocab, *,
                 sample: bool = False, rng: np.random.Generator | None = None) -> tuple[str, str]:
    """Pick (K1, K2) from a four-character request.

    Usable characters are those in the vocabulary.  They are ranked by
    posterior, then corpus frequency, then input position; K1 is the best and
    K2 the best character differing from K1.  With ``sample`` the two are
    instead drawn in turn with posterior-proportional weights.
    """
    text = user_input.strip()
    if len(text) != INPUT_LENGTH:
        raise ValueError(f"input must be exactly {INPUT_LENGTH} characters, got {len(text)}")
    usable = [(pos, ch) for pos, ch in enumerate(text) if ch in vocab]
    if len(usable) < 2:
        raise SelectionError(
            f"only {len(usable)} of the characters in {text!r} are known; need at least 2"
        )
    ranked = sorted(usable, key=lambda pc: (-posterior.p(pc[1]), -posterior.total(pc[1]), pc[0]))
    chars = [ch for _, ch in ranked]

    if sample:
        rng = rng if rng is not None else np.random.default_rng(0)
        k1 = _draw(chars, posterior, rng)
        rest = [c for c in chars if c != k1]
        k2 = _draw(rest, posterior, rng) if rest else k1
    else:
        k1 = chars[0]
        k2 = next((c for c in chars[1:] if c != k1), k1)
    if k1 == k2:
        log.warning("input %r offers a single distinct head character %r", text, k1)
    return k1, k2


def _draw(chars, posterior: HeadPosterior, rng) -> str:
    w = np.array([posterior.p(c) for c in chars], dtype=np.float64)
    if w.sum() <= 0:
        w = np.ones(len(chars))
    return chars[int(rng.choice(len(chars), p=w / w.sum()))]
