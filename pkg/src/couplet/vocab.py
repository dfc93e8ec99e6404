"""Corpus loading, character vocabulary, encoding and dataset splits."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

UNK = "<unk>"
EOS = "<eos>"

# Held-out sizes used with the full corpus; small corpora are scaled down.
FULL_CORPUS_SIZE = 602858
FULL_VAL_N = 1000
FULL_TEST_N = 2000


class CorpusFormatError(ValueError):
    pass


def load_corpus(path):
    """Read ``antecedent<TAB>subsequent`` lines.

    Returns ``(pairs, skipped)`` where ``pairs`` is a list of ``(str, str)``
    and ``skipped`` counts lines dropped for unequal or empty clauses or a
    missing separator.  Blank lines are ignored.
    """
    raw = Path(path).read_bytes()
    pairs = []
    skipped = 0
    for lineno, bline in enumerate(raw.split(b"\n"), start=1):
        try:
            line = bline.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorpusFormatError(f"{path}:{lineno}: invalid UTF-8 ({exc.reason})") from None
        line = line.rstrip("\r")
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            skipped += 1
            continue
        first, second = parts[0].strip(), parts[1].strip()
        if not first or not second or len(first) != len(second):
            skipped += 1
            continue
        pairs.append((first, second))
    if skipped:
        log.info("%s: skipped %d malformed lines", path, skipped)
    return pairs, skipped


def write_corpus(path, pairs) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for first, second in pairs:
            fh.write(f"{first}\t{second}\n")


class Vocab:
    """Character <-> id bijection; ``<unk>`` and ``<eos>`` take the last two ids."""

    def __init__(self, chars, freq):
        self.id_to_char = list(chars) + [UNK, EOS]
        self.char_to_id = {ch: i for i, ch in enumerate(self.id_to_char)}
        if len(self.char_to_id) != len(self.id_to_char):
            raise ValueError("duplicate characters in vocabulary")
        self.freq = {ch: int(freq.get(ch, 0)) for ch in self.id_to_char}
        self.unk = self.char_to_id[UNK]
        self.eos = self.char_to_id[EOS]

    def __len__(self):
        return len(self.id_to_char)

    def __contains__(self, ch):
        return ch in self.char_to_id and ch not in (UNK, EOS)

    def encode(self, text) -> list[int]:
        return [self.char_to_id.get(ch, self.unk) for ch in text]

    def decode(self, ids) -> str:
        return "".join(self.id_to_char[i] for i in ids)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for i, ch in enumerate(self.id_to_char):
                fh.write(f"{ch}\t{i}\t{self.freq[ch]}\n")

    @classmethod
    def load(cls, path) -> "Vocab":
        rows = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line:
                continue
            ch, idx, freq = line.split("\t")
            rows.append((int(idx), ch, int(freq)))
        rows.sort()
        if [r[0] for r in rows] != list(range(len(rows))):
            raise ValueError(f"{path}: ids are not contiguous from 0")
        chars = [ch for _, ch, _ in rows]
        if chars[-2:] != [UNK, EOS]:
            raise ValueError(f"{path}: expected {UNK} and {EOS} as the final two ids")
        return cls(chars[:-2], {ch: f for _, ch, f in rows})


def char_frequencies(pairs) -> Counter:
    counts = Counter()
    for first, second in pairs:
        counts.update(first)
        counts.update(second)
    return counts


def build_vocab(pairs, min_freq: int = 10) -> Vocab:
    """Keep characters seen at least ``min_freq`` times over both clauses.

    Ids run by descending frequency, ties by code point.
    """
    if not pairs:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    counts = char_frequencies(pairs)
    kept = sorted((ch for ch, n in counts.items() if n >= min_freq),
                  key=lambda ch: (-counts[ch], ord(ch)))
    return Vocab(kept, counts)


@dataclass(frozen=True)
class CoupletPair:
    antecedent: tuple[int, ...]
    subsequent: tuple[int, ...]

    def __post_init__(self):
        if not self.antecedent or len(self.antecedent) != len(self.subsequent):
            raise ValueError("couplet clauses must be non-empty and of equal length")

    @classmethod
    def from_text(cls, first: str, second: str, vocab: Vocab) -> "CoupletPair":
        return cls(tuple(vocab.encode(first)), tuple(vocab.encode(second)))


@dataclass(frozen=True)
class DatasetSplit:
    train: list
    validation: list
    test: list
    seed: int


def default_split_sizes(n: int) -> tuple[int, int]:
    """Held-out sizes: the full-corpus counts, scaled down to 5% / 10% when small."""
    if n >= FULL_CORPUS_SIZE:
        return FULL_VAL_N, FULL_TEST_N
    return min(FULL_VAL_N, n // 20), min(FULL_TEST_N, n // 10)


def make_splits(corpus, val_n: int | None = None, test_n: int | None = None,
                seed: int = 0) -> DatasetSplit:
    corpus = list(corpus)
    if val_n is None or test_n is None:
        dv, dt = default_split_sizes(len(corpus))
        val_n = dv if val_n is None else val_n
        test_n = dt if test_n is None else test_n
    if val_n < 0 or test_n < 0:
        raise ValueError("split sizes must be non-negative")
    if val_n + test_n > 0 and val_n + test_n >= len(corpus):
        raise ValueError(
            f"corpus of {len(corpus)} pairs too small for {val_n} validation + {test_n} test"
        )
    order = np.random.default_rng(seed).permutation(len(corpus))
    shuffled = [corpus[i] for i in order]
    val = shuffled[:val_n]
    test = shuffled[val_n:val_n + test_n]
    train = shuffled[val_n + test_n:]
    return DatasetSplit(train, val, test, seed)


def collect_head_stats(pairs) -> dict[str, tuple[int, int]]:
    """Per character: (occurrences over both clauses, times heading an antecedent)."""
    totals = char_frequencies(pairs)
    heads = Counter(first[0] for first, _ in pairs if first)
    return {ch: (totals[ch], heads.get(ch, 0)) for ch in totals}
