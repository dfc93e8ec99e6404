"""Synthetic couplet corpora for tests, demos and desk-scale training.

Antecedents are walks on a fixed sparse Markov chain over 32 characters
(16 level-tone, 16 oblique-tone).  Each subsequent clause is the
character-wise image of its antecedent under a fixed level<->oblique pairing,
so every pair matches in length, never repeats a character position-wise,
and ends on opposed tones.
"""

from __future__ import annotations

import numpy as np

LEVEL = "春花风天年山人家门心江云祥安红来"
OBLIQUE = "满地月树水喜瑞旺岁景富贵好万笑户"
PAIRING = {**dict(zip(LEVEL, OBLIQUE)), **dict(zip(OBLIQUE, LEVEL))}
ALPHABET = LEVEL + OBLIQUE
HEADS = "春花天山人满喜瑞富好"

_STRUCTURE_SEED = 20190701
_SUCCESSORS = 2


def _transition_table() -> dict[str, str]:
    rng = np.random.default_rng(_STRUCTURE_SEED)
    table = {}
    for ch in ALPHABET:
        others = [c for c in ALPHABET if c != ch]
        picks = rng.choice(len(others), size=_SUCCESSORS, replace=False)
        table[ch] = "".join(others[i] for i in sorted(picks))
    return table


TRANSITIONS = _transition_table()


def mirror(clause: str) -> str:
    return "".join(PAIRING[ch] for ch in clause)


def toy_corpus(n: int, seed: int = 0, min_len: int = 5, max_len: int = 7) -> list[tuple[str, str]]:
    """``n`` (antecedent, subsequent) pairs; deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(n):
        length = int(rng.integers(min_len, max_len + 1))
        clause = [HEADS[int(rng.integers(len(HEADS)))]]
        while len(clause) < length:
            succ = TRANSITIONS[clause[-1]]
            clause.append(succ[int(rng.integers(len(succ)))])
        first = "".join(clause)
        pairs.append((first, mirror(first)))
    return pairs
