"""Rule-based re-ranking of candidate couplets.

The total score is a weighted sum of four components in [0, 1]:

* length     1 when both clauses have the same length, else 0
* repetition 1 minus the share of violating positions, where a position
             violates if both clauses carry the same character there or if
             either clause repeats a character it used earlier
* tone       1 for known opposed ending tones, 0 for known equal ones,
             0.5 when either ending is missing from the tone lexicon
* sentiment  mean character polarity over both clauses mapped from
             [-1, 1] onto [0, 1]
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

LEVEL = "L"
OBLIQUE = "O"
RANK_DECIMALS = 12


def _bundled(name: str):
    return resources.files("couplet").joinpath("data", name)


class ToneLexicon:
    def __init__(self, tones: dict, source: str = "<memory>"):
        bad = {ch: t for ch, t in tones.items() if t not in (LEVEL, OBLIQUE)}
        if bad:
            raise ValueError(f"tone classes must be {LEVEL!r} or {OBLIQUE!r}: {bad}")
        self.tones = dict(tones)
        self.source = source

    def tone(self, ch: str) -> str | None:
        return self.tones.get(ch)

    def __len__(self):
        return len(self.tones)

    @classmethod
    def load(cls, path=None) -> "ToneLexicon":
        text, source = _read_lexicon(path, "tones.tsv")
        tones = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            ch, tone = line.split("\t")
            tone = tone.strip()
            if tone not in (LEVEL, OBLIQUE):
                raise ValueError(f"{source}:{lineno}: unknown tone class {tone!r}")
            tones[ch] = tone
        return cls(tones, source)


class SentimentLexicon:
    def __init__(self, polarity: dict, source: str = "<memory>"):
        if any(v not in (-1, 1) for v in polarity.values()):
            raise ValueError("polarities must be +1 or -1")
        self.polarity = dict(polarity)
        self.source = source

    def __call__(self, ch: str) -> int:
        return self.polarity.get(ch, 0)

    @classmethod
    def load(cls, path=None) -> "SentimentLexicon":
        text, source = _read_lexicon(path, "sentiment.tsv")
        polarity = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            ch, value = line.split("\t")
            value = int(value.strip())
            if value not in (-1, 1):
                raise ValueError(f"{source}:{lineno}: polarity must be +1 or -1")
            polarity[ch] = value
        return cls(polarity, source)


def _read_lexicon(path, default_name):
    if path is None:
        return _bundled(default_name).read_text(encoding="utf-8"), f"bundled:{default_name}"
    return Path(path).read_text(encoding="utf-8"), str(path)


@dataclass(frozen=True)
class RankWeights:
    length: float = 0.25
    repeat: float = 0.25
    tone: float = 0.25
    sentiment: float = 0.25

    def __post_init__(self):
        ws = self.as_tuple()
        if any(w < 0 for w in ws) or sum(ws) <= 0:
            raise ValueError(f"weights must be non-negative with a positive sum: {ws}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.length, self.repeat, self.tone, self.sentiment)

    def scaled(self, factor: float) -> "RankWeights":
        return RankWeights(*(w * factor for w in self.as_tuple()))


@dataclass(frozen=True)
class Candidate:
    antecedent: str
    subsequent: str
    logprob: float = 0.0


@dataclass(frozen=True)
class ScoredCouplet:
    antecedent: str
    subsequent: str
    s_l: float
    s_r: float
    s_t: float
    s_s: float
    total: float
    logprob: float = 0.0

    def scores(self) -> dict:
        return {"length": self.s_l, "repeat": self.s_r, "tone": self.s_t,
                "sentiment": self.s_s, "total": self.total}

    def to_dict(self) -> dict:
        return {"antecedent": self.antecedent, "subsequent": self.subsequent,
                "logprob": self.logprob, "scores": self.scores()}


def repeat_violations(first: str, second: str) -> int:
    seen1, seen2 = set(), set()
    bad = 0
    for i in range(max(len(first), len(second))):
        a = first[i] if i < len(first) else None
        b = second[i] if i < len(second) else None
        if (a is not None and a == b) or a in seen1 or b in seen2:
            bad += 1
        if a is not None:
            seen1.add(a)
        if b is not None:
            seen2.add(b)
    return bad


def tone_score(first: str, second: str, tones: ToneLexicon) -> float:
    t1, t2 = tones.tone(first[-1]), tones.tone(second[-1])
    if t1 is None or t2 is None:
        return 0.5
    return 1.0 if t1 != t2 else 0.0


def score_components(first: str, second: str, tones: ToneLexicon,
                     sentiment: SentimentLexicon) -> tuple[float, float, float, float]:
    if not first or not second:
        raise ValueError("both clauses must be non-empty")
    s_l = 1.0 if len(first) == len(second) else 0.0
    s_r = min(1.0, max(0.0, 1.0 - repeat_violations(first, second) / len(first)))
    s_t = tone_score(first, second, tones)
    chars = first + second
    s_s = (1.0 + sum(sentiment(ch) for ch in chars) / len(chars)) / 2.0
    return s_l, s_r, s_t, s_s


def total_score(components, weights: RankWeights) -> float:
    return sum(w * s for w, s in zip(weights.as_tuple(), components))


def score_couplet(cand: Candidate, weights: RankWeights, tones: ToneLexicon,
                  sentiment: SentimentLexicon) -> ScoredCouplet:
    comps = score_components(cand.antecedent, cand.subsequent, tones, sentiment)
    return ScoredCouplet(cand.antecedent, cand.subsequent, *comps,
                         total=total_score(comps, weights), logprob=cand.logprob)


def rerank(pool, weights: RankWeights, tones: ToneLexicon,
           sentiment: SentimentLexicon) -> list[ScoredCouplet]:
    """Score every candidate; best first (total, then logprob, then text)."""
    if not pool:
        raise ValueError("cannot re-rank an empty pool")
    scored = [score_couplet(c, weights, tones, sentiment) for c in pool]
    # compare totals relative to the weight sum, so ties survive rescaling the weights
    norm = sum(weights.as_tuple())
    scored.sort(key=lambda s: (-round(s.total / norm, RANK_DECIMALS), -s.logprob,
                               s.antecedent, s.subsequent))
    return scored
