import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from couplet.vocab import (EOS, UNK, CorpusFormatError, CoupletPair, Vocab, build_vocab,
                           collect_head_stats, default_split_sizes, load_corpus, make_splits,
                           write_corpus)

PAIR = ("春回大地", "福满人间")


def write(tmp_path, text, name="c.tsv"):
    p = tmp_path / name
    p.write_bytes(text.encode("utf-8") if isinstance(text, str) else text)
    return p


def test_load_corpus_single_line(tmp_path):
    pairs, skipped = load_corpus(write(tmp_path, "春回大地\t福满人间\n"))
    assert pairs == [PAIR]
    assert skipped == 0


def test_load_corpus_skips_unequal_and_empty(tmp_path):
    text = "春回大地春\t福满人间\n春\t\n春回大地\t福满人间\nno tab here\n"
    pairs, skipped = load_corpus(write(tmp_path, text))
    assert pairs == [PAIR]
    assert skipped == 3


def test_load_corpus_empty_file(tmp_path):
    assert load_corpus(write(tmp_path, "")) == ([], 0)


def test_load_corpus_bad_utf8_reports_line(tmp_path):
    path = write(tmp_path, "春回大地\t福满人间\n".encode() + b"\xff\xfe\t\x80\n")
    with pytest.raises(CorpusFormatError, match=":2:"):
        load_corpus(path)


def test_load_corpus_missing_file(tmp_path):
    with pytest.raises(OSError):
        load_corpus(tmp_path / "absent.tsv")


def test_write_then_load_round_trip(tmp_path):
    pairs = [PAIR, ("天高", "地厚")]
    write_corpus(tmp_path / "c.tsv", pairs)
    assert load_corpus(tmp_path / "c.tsv") == (pairs, 0)


def test_min_freq_boundary():
    corpus = [("甲乙", "丙丁")] * 9 + [("甲戊", "丙己")]
    v = build_vocab(corpus, min_freq=10)
    assert "甲" in v and "丙" in v  # 10 occurrences each
    assert "乙" not in v  # 9 occurrences
    assert v.encode("乙") == [v.unk]


def test_single_pair_vocab_size():
    v = build_vocab([PAIR], min_freq=1)
    assert len(v) == 8 + 2
    assert v.id_to_char[-2:] == [UNK, EOS]


def test_vocab_order_by_frequency_then_code_point():
    v = build_vocab([("bba", "cca"), ("da", "ea")], min_freq=1)
    assert v.id_to_char[:-2] == ["a", "b", "c", "d", "e"]


def test_empty_corpus_rejected():
    with pytest.raises(ValueError):
        build_vocab([])


def test_encode_decode():
    v = build_vocab([PAIR], min_freq=1)
    assert v.decode(v.encode("春回大地")) == "春回大地"
    ids = v.encode("春X大地")
    assert ids[1] == v.unk and len(ids) == 4
    assert v.decode(ids) == f"春{UNK}大地"
    assert v.encode("") == []


def test_vocab_save_load(tmp_path):
    v = build_vocab([PAIR, ("春风", "人和")], min_freq=1)
    v.save(tmp_path / "v.tsv")
    lines = (tmp_path / "v.tsv").read_text(encoding="utf-8").splitlines()
    assert lines[0].split("\t") == [v.id_to_char[0], "0", str(v.freq[v.id_to_char[0]])]
    w = Vocab.load(tmp_path / "v.tsv")
    assert w.id_to_char == v.id_to_char and w.freq == v.freq


han = st.text(alphabet="春夏秋冬风花雪月山水天地人和", min_size=1, max_size=8)


@given(st.lists(st.tuples(han, han), min_size=1, max_size=12), st.integers(1, 3))
def test_vocab_properties(pairs, min_freq):
    v = build_vocab(pairs, min_freq)
    assert v.unk != v.eos and max(v.unk, v.eos) < len(v)
    assert build_vocab(list(pairs), min_freq).id_to_char == v.id_to_char
    for ch in v.id_to_char[:-2]:
        assert v.freq[ch] >= min_freq
        assert v.decode(v.encode(ch)) == ch
    ids = list(range(len(v) - 2))
    assert v.encode(v.decode(ids)) == ids


def test_coupletpair_requires_equal_lengths():
    with pytest.raises(ValueError):
        CoupletPair((1, 2), (3,))
    with pytest.raises(ValueError):
        CoupletPair((), ())


def test_split_arithmetic_and_determinism():
    corpus = [(f"{i:03d}", f"{i:03d}") for i in range(100)]
    s = make_splits(corpus, 10, 20, seed=4)
    assert (len(s.train), len(s.validation), len(s.test)) == (70, 10, 20)
    assert sorted(s.train + s.validation + s.test) == corpus
    assert len(set(s.train) & set(s.test)) == 0
    assert make_splits(corpus, 10, 20, seed=4) == s
    assert make_splits(corpus, 10, 20, seed=5) != s


def test_split_no_holdout():
    corpus = [("a", "b"), ("c", "d")]
    s = make_splits(corpus, 0, 0)
    assert sorted(s.train) == corpus and not s.validation and not s.test


def test_split_too_small():
    with pytest.raises(ValueError):
        make_splits([("a", "b")] * 10, 5, 5)


def test_default_split_sizes_scale():
    assert default_split_sizes(700000) == (1000, 2000)
    assert default_split_sizes(200) == (10, 20)
    s = make_splits([(str(i), str(i)) for i in range(200)])
    assert (len(s.validation), len(s.test)) == (10, 20)


def test_head_stats():
    stats = collect_head_stats([PAIR])
    assert stats["春"] == (1, 1)
    assert stats["回"] == (1, 0)
    doubled = collect_head_stats([PAIR, PAIR])
    assert doubled["春"] == (2, 2)
    assert all(head <= total for total, head in doubled.values())
