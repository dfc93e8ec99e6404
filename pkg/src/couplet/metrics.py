"""Automatic evaluation: character BLEU and the couplet structure checks."""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass

from .rerank import ToneLexicon

log = logging.getLogger(__name__)


class EvaluationError(RuntimeError):
    pass


def _ngrams(seq, n: int) -> Counter:
    return Counter(tuple(seq[i:i + n]) for i in range(len(seq) - n + 1))


def bleu(hypotheses, references, max_n: int = 4) -> float:
    """Corpus BLEU over characters with one reference per hypothesis.

    An order n >= 2 with no matching n-gram uses the add-one estimate
    ``1 / (count + 1)`` instead of zero.
    """
    if len(hypotheses) != len(references):
        raise ValueError(f"{len(hypotheses)} hypotheses vs {len(references)} references")
    if not hypotheses:
        raise ValueError("BLEU needs at least one hypothesis")
    matches = [0] * max_n
    counts = [0] * max_n
    hyp_len = ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, max_n + 1):
            h = _ngrams(hyp, n)
            r = _ngrams(ref, n)
            matches[n - 1] += sum(min(c, r[g]) for g, c in h.items())
            counts[n - 1] += sum(h.values())
    if hyp_len == 0 or matches[0] == 0:
        return 0.0
    log_p = 0.0
    for n in range(max_n):
        if matches[n] == 0:
            log_p += math.log(1.0 / (counts[n] + 1))
        else:
            log_p += math.log(matches[n] / counts[n])
    bp = 1.0 if hyp_len > ref_len else math.exp(1.0 - ref_len / hyp_len)
    return bp * math.exp(log_p / max_n)


def length_ok(first: str, second: str) -> bool:
    return len(first) == len(second)


def structure_ok(first: str, second: str) -> bool:
    return all(a != b for a, b in zip(first, second))


def tone_ok(first: str, second: str, tones: ToneLexicon) -> bool:
    if not first or not second:
        return False
    t1, t2 = tones.tone(first[-1]), tones.tone(second[-1])
    return t1 is not None and t2 is not None and t1 != t2


def structural_metrics(couplets, tones: ToneLexicon) -> tuple[float, float, float]:
    """Pass rates for (length matching, character structure, tone pairing)."""
    couplets = list(couplets)
    if not couplets:
        raise ValueError("no couplets to evaluate")
    n = len(couplets)
    return (sum(length_ok(a, b) for a, b in couplets) / n,
            sum(structure_ok(a, b) for a, b in couplets) / n,
            sum(tone_ok(a, b, tones) for a, b in couplets) / n)


@dataclass(frozen=True)
class EvalReport:
    length_matching: float
    character_structure: float
    tone_pairing: float
    bleu: float
    n_evaluated: int
    n_skipped: int = 0

    @property
    def skip_rate(self) -> float:
        total = self.n_evaluated + self.n_skipped
        return self.n_skipped / total if total else 0.0

    def summary(self) -> str:
        return (f"length={self.length_matching:.4f} structure={self.character_structure:.4f} "
                f"tone={self.tone_pairing:.4f} bleu={self.bleu:.4f} n={self.n_evaluated}")

    def table(self, method: str = "generator") -> str:
        head = ("Method", "Length Matching", "Character Structure", "Tone Pairing", "BLEU")
        row = (method, f"{self.length_matching:.2f}", f"{self.character_structure:.2f}",
               f"{self.tone_pairing:.2f}", f"{self.bleu:.4f}")
        widths = [max(len(a), len(b)) for a, b in zip(head, row)]
        lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in (head, row)]
        if self.n_skipped:
            lines.append(f"skipped {self.n_skipped} items ({self.skip_rate:.1%})")
        return "\n".join(lines)


def evaluate_testset(pipeline, pairs, tones: ToneLexicon) -> EvalReport:
    """Regenerate each test couplet from its two heads and score it.

    ``pipeline.generate_pair(k1, k2)`` must return ``(antecedent, subsequent)``
    or raise; failing items are skipped and counted.
    """
    generated, refs = [], []
    skipped = 0
    for first, second in pairs:
        try:
            out = pipeline.generate_pair(first[0], second[0])
        except Exception as exc:  # any stage failure just skips the item
            log.info("skipping %s/%s: %s", first, second, exc)
            skipped += 1
            continue
        generated.append(tuple(out))
        refs.append((first, second))
    if not generated:
        raise EvaluationError(f"no test item could be generated ({skipped} skipped)")
    hyps = [clause for pair in generated for clause in pair]
    ref_clauses = [clause for pair in refs for clause in pair]
    lm, cs, tp = structural_metrics(generated, tones)
    return EvalReport(lm, cs, tp, bleu(hyps, ref_clauses), len(generated), skipped)
