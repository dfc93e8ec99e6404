import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from couplet.rerank import (Candidate, RankWeights, SentimentLexicon, ToneLexicon, rerank,
                            repeat_violations, score_components, total_score)
from couplet.synthetic import LEVEL, OBLIQUE

TONES = ToneLexicon({"天": "L", "山": "L", "地": "O", "水": "O"})
NEUTRAL = SentimentLexicon({})
SENT = SentimentLexicon({"福": 1, "喜": 1, "愁": -1})


def test_clean_couplet_components():
    assert score_components("云天", "雨地", TONES, NEUTRAL) == (1.0, 1.0, 1.0, 0.5)


def test_unequal_lengths():
    s_l, *_ = score_components("一二三四五六天", "七八九十甲地", TONES, NEUTRAL)
    assert s_l == 0.0


def test_tone_cases():
    assert score_components("云天", "雨山", TONES, NEUTRAL)[2] == 0.0
    assert score_components("云地", "雨天", TONES, NEUTRAL)[2] == 1.0
    assert score_components("云天", "雨雨", TONES, NEUTRAL)[2] == 0.5


def test_repeat_rule():
    assert repeat_violations("春风", "秋雨") == 0
    assert repeat_violations("春风", "春雨") == 1          # same position
    assert repeat_violations("风风", "秋雨") == 1          # intra-clause repeat
    assert score_components("春风春", "春雨雪", TONES, NEUTRAL)[1] == pytest.approx(1 - 2 / 3)
    assert score_components("aaaa", "aaaa", TONES, NEUTRAL)[1] == 0.0


def test_sentiment_mapping():
    assert score_components("福喜", "福喜", TONES, SENT)[3] == 1.0
    assert score_components("愁愁", "愁愁", TONES, SENT)[3] == 0.0
    assert score_components("福愁", "云雨", TONES, SENT)[3] == 0.5


def test_empty_clause_rejected():
    with pytest.raises(ValueError):
        score_components("", "a", TONES, NEUTRAL)


def test_total_score_examples():
    w = RankWeights()
    assert total_score((1, 1, 1, 1), w) == 1.0
    assert total_score((1, 1, 0, 0.5), w) == 0.625
    assert total_score((0.3, 0.9, 0.2, 0.7), RankWeights(0, 0, 2, 0)) == 0.4


def test_weights_validation():
    with pytest.raises(ValueError):
        RankWeights(-1, 1, 1, 1)
    with pytest.raises(ValueError):
        RankWeights(0, 0, 0, 0)


def test_rerank_single_and_empty():
    out = rerank([Candidate("云天", "雨地", -1.0)], RankWeights(), TONES, NEUTRAL)
    assert len(out) == 1 and out[0].antecedent == "云天"
    with pytest.raises(ValueError):
        rerank([], RankWeights(), TONES, NEUTRAL)


def test_tone_valid_candidate_wins_with_heavy_tone_weight():
    pool = [Candidate("云天", "雨山", -0.1), Candidate("风天", "月地", -9.0),
            Candidate("花天", "叶天", -0.5)]
    best = rerank(pool, RankWeights(0.1, 0.1, 5.0, 0.1), TONES, NEUTRAL)[0]
    assert best.subsequent == "月地" and best.s_t == 1.0


def test_ties_broken_by_logprob_then_text():
    pool = [Candidate("云天", "雨地", -2.0), Candidate("风天", "月地", -1.0),
            Candidate("花天", "叶地", -1.0)]
    out = rerank(pool, RankWeights(), TONES, NEUTRAL)
    assert [c.antecedent for c in out] == ["花天", "风天", "云天"]


def test_total_equals_weighted_sum():
    w = RankWeights(0.1, 0.2, 0.3, 0.4)
    for c in rerank([Candidate("福天", "愁地"), Candidate("云云", "雨雪")], w, TONES, SENT):
        assert c.total == sum(a * b for a, b in zip(w.as_tuple(), (c.s_l, c.s_r, c.s_t, c.s_s)))


def test_bundled_lexicons():
    tones = ToneLexicon.load()
    assert all(tones.tone(ch) == "L" for ch in LEVEL)
    assert all(tones.tone(ch) == "O" for ch in OBLIQUE)
    assert tones.tone("X") is None
    sent = SentimentLexicon.load()
    assert sent("福") == 1 and sent("X") == 0
    assert set(sent.polarity.values()) <= {-1, 1}


def test_lexicon_file_errors(tmp_path):
    bad = tmp_path / "t.tsv"
    bad.write_text("天\tX\n", encoding="utf-8")
    with pytest.raises(ValueError, match=":1:"):
        ToneLexicon.load(bad)
    bad.write_text("福\t2\n", encoding="utf-8")
    with pytest.raises(ValueError):
        SentimentLexicon.load(bad)
    ok = tmp_path / "ok.tsv"
    ok.write_text("# comment\n天\tL\n地\tO\n", encoding="utf-8")
    assert ToneLexicon.load(ok).tones == {"天": "L", "地": "O"}


clause = st.text(alphabet="天山地水云雨福愁喜风", min_size=1, max_size=6)


@given(clause, clause)
def test_components_in_unit_interval(a, b):
    comps = score_components(a, b, TONES, SENT)
    assert all(0.0 <= c <= 1.0 for c in comps)
    w = RankWeights(0.3, 0.1, 0.5, 0.2)
    assert 0.0 <= total_score(comps, w) <= sum(w.as_tuple()) + 1e-12


@given(st.lists(st.tuples(clause, clause, st.floats(-20, 0)), min_size=1, max_size=8),
       st.tuples(*[st.floats(0.01, 3)] * 4), st.floats(0.01, 100))
def test_ranking_invariant_to_weight_scaling(items, ws, c):
    pool = [Candidate(a, b, lp) for a, b, lp in items]
    w = RankWeights(*ws)
    base = [(s.antecedent, s.subsequent, s.logprob) for s in rerank(pool, w, TONES, SENT)]
    scaled = [(s.antecedent, s.subsequent, s.logprob) for s in rerank(pool, w.scaled(c), TONES, SENT)]
    assert base == scaled
    assert base == [(s.antecedent, s.subsequent, s.logprob)
                    for s in rerank(list(reversed(pool)), w, TONES, SENT)]


# every ending has a known tone, so each candidate's tone score is 0 or 1
toned = st.builds(lambda body, end: body + end, st.text(alphabet="云雨福愁喜风", max_size=5),
                  st.sampled_from("天山地水"))


@given(st.lists(st.tuples(toned, toned), min_size=1, max_size=8), st.integers(0, 1000))
def test_tone_dominance(pairs, seed):
    rng = np.random.default_rng(seed)
    pool = [Candidate(a, b, float(rng.normal())) for a, b in pairs] + [Candidate("云天", "雨地", -50.0)]
    others = rng.uniform(0, 1, size=3)
    w = RankWeights(others[0], others[1], others.sum() + 0.01, others[2])
    ranked = rerank(pool, w, TONES, SENT)
    assert ranked[0].s_t == 1.0
    first_bad = next((i for i, s in enumerate(ranked) if s.s_t < 1.0), len(ranked))
    assert all(s.s_t == 0.0 for s in ranked[first_bad:])


def test_unknown_tone_needs_double_weight_to_be_dominated():
    # an unknown ending scores 0.5, so it can beat a tone-valid couplet when
    # w_t only just exceeds the other weights
    # valid: 0.3 + 0.3/4 + w_t + 0.3/8 ; unknown: 0.9 + w_t/2
    pool = [Candidate("愁愁愁天", "愁愁愁地"), Candidate("福喜", "喜福")]
    assert rerank(pool, RankWeights(0.3, 0.3, 0.91, 0.3), TONES, SENT)[0].s_t == 0.5
    assert rerank(pool, RankWeights(0.3, 0.3, 1.9, 0.3), TONES, SENT)[0].s_t == 1.0
