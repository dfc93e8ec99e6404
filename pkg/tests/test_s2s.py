import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from models import model_grad_error, s2s_batch, tiny_s2s

from couplet.cbs import BeamConfig
from couplet.nn import ShapeError, grad_check
from couplet.s2s import AttnContext, S2SConfig, char_accuracy, train_s2s
from couplet.training import TrainConfig
from couplet.vocab import CoupletPair, DatasetSplit


def test_config_validation():
    with pytest.raises(ValueError):
        S2SConfig(hidden=0)
    with pytest.raises(ValueError):
        S2SConfig(cell_kind="gru")


@pytest.mark.parametrize("m", [1, 3, 6])
def test_encode_one_state_per_position(m):
    model, params = tiny_s2s()
    enc = model.encode(params, [0] * m)
    assert enc.states.shape == (m, model.config.hidden)


def test_encode_zero_weights_gives_zero_states():
    model, params = tiny_s2s("rnn")
    for v in params.values.values():
        v[...] = 0.0
    assert not model.encode(params, [0, 1, 2]).states.any()


def test_encode_empty_rejected():
    model, params = tiny_s2s()
    with pytest.raises(ValueError):
        model.encode(params, [])


def test_attend_single_state():
    model, params = tiny_s2s()
    enc = model.encode(params, [2])
    ctx = model.attend(params, np.ones(4), enc)
    assert np.allclose(ctx.weights, [1.0])
    assert np.allclose(ctx.context, enc.states[0])


def test_attend_zero_scoring_is_uniform():
    model, params = tiny_s2s()
    params["s2s.att.v"][...] = 0.0
    enc = model.encode(params, [0, 1, 2, 0])
    ctx = model.attend(params, np.ones(4), enc)
    assert np.allclose(ctx.weights, 0.25)
    assert np.allclose(ctx.context, enc.states.mean(axis=0))


def test_attend_closed_form_weights():
    # Two orthogonal states; with W_h = 0, W_s picks coordinate 0 and v scales
    # the tanh so that the raw scores are (ln 3, 0).
    model, params = tiny_s2s(hidden=2, att=1)
    params["s2s.att.wh"][...] = 0.0
    params["s2s.att.ws"][...] = [[1.0, 0.0]]
    enc = model.encode(params, [0, 1])
    enc.states = np.array([[0.5, 0.0], [0.0, 0.5]])
    params["s2s.att.v"][...] = math.log(3) / math.tanh(0.5)
    ctx = model.attend(params, np.zeros(2), enc)
    assert np.allclose(ctx.weights, [0.75, 0.25])
    assert np.allclose(ctx.context, [0.375, 0.125])


def test_attend_errors():
    model, params = tiny_s2s()
    enc = model.encode(params, [0, 1])
    with pytest.raises(ShapeError):
        model.attend(params, np.ones(3), enc)
    enc.states = np.zeros((0, 4))
    with pytest.raises(ValueError):
        model.attend(params, np.ones(4), enc)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 2), min_size=1, max_size=6), st.integers(0, 50))
def test_attention_simplex_and_convexity(src, seed):
    model, params = tiny_s2s(seed=seed)
    enc = model.encode(params, src)
    h = np.random.default_rng(seed).normal(size=4)
    ctx = model.attend(params, h, enc)
    assert np.all(ctx.weights >= 0) and abs(ctx.weights.sum() - 1) < 1e-6
    assert np.max(np.abs(ctx.context - ctx.weights @ enc.states)) < 1e-5


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 6), st.integers(0, 50))
def test_attention_permutation_equivariance(m, seed):
    rng = np.random.default_rng(seed)
    model, params = tiny_s2s(seed=seed)
    enc = model.encode(params, list(rng.integers(0, 3, size=m)))
    h = rng.normal(size=4)
    perm = rng.permutation(m)
    base = model.attend(params, h, enc)
    enc.states = enc.states[perm]
    permuted = model.attend(params, h, enc)
    assert np.allclose(permuted.weights, base.weights[perm], atol=1e-12)
    assert np.allclose(permuted.context, base.context, atol=1e-12)


def test_decode_step_zero_weights_and_shape():
    model, params = tiny_s2s("rnn")
    enc = model.encode(params, [0, 1])
    ctx = model.attend(params, enc.final[-1][0][0], enc)
    _, logits = model.decode_step(params, enc.final, 1, ctx)
    assert logits.shape == (model.vocab_size,)
    for v in params.values.values():
        v[...] = 0.0
    state, _ = model.decode_step(params, enc.final, 1, AttnContext(np.ones(1), np.zeros(4)))
    assert all(not h.any() for h, _ in state)


@pytest.mark.parametrize("kind,layers", [("rnn", 1), ("rnn", 2), ("lstm", 1), ("lstm", 2)])
def test_gradient_check(kind, layers):
    model, params = tiny_s2s(kind, layers, seed=10 + layers)
    assert model_grad_error(model, params, s2s_batch()) < 1e-3


def test_gradient_check_encoder_only():
    model, params = tiny_s2s("lstm", 2, seed=4)
    enc_names = [n for n in params if n.startswith("s2s.enc")]
    batch = s2s_batch()

    def loss(p):
        t, n = model.forward_backward(p, batch, backward=False)
        return t / n

    err = grad_check(loss, lambda p: model.forward_backward(p, batch), params, names=enc_names)
    assert err < 1e-3


def mapping_split(n=50, seed=0):
    # S2 is a fixed character-wise map of S1; ids 0..5 regular, 6 unk, 7 eos
    rng = np.random.default_rng(seed)
    table = [3, 4, 5, 0, 1, 2]
    pairs = []
    for _ in range(n):
        src = tuple(int(x) for x in rng.integers(0, 6, size=int(rng.integers(3, 6))))
        pairs.append(CoupletPair(src, tuple(table[x] for x in src)))
    return DatasetSplit(pairs, [], [], seed)


class _V:
    eos, unk = 7, 6

    def __len__(self):
        return 8


def test_zero_epochs_and_determinism():
    split = mapping_split(12)
    cfg = S2SConfig(hidden=8, embedding_dim=4, attention_dim=8, layers=1)
    _, r0 = train_s2s(split, cfg, TrainConfig(epochs=0), 1, _V())
    assert r0.history == []
    hyper = TrainConfig(epochs=3, batch_size=4, lr=0.01)
    _, a = train_s2s(split, cfg, hyper, 1, _V())
    _, b = train_s2s(split, cfg, hyper, 1, _V())
    assert a.train_losses == b.train_losses


@pytest.mark.parametrize("seed", range(3))
def test_generation_forced_length_and_head(seed):
    model, params = tiny_s2s(vocab=8, seed=seed)
    rng = np.random.default_rng(seed)
    for m in (1, 2, 5):
        src = list(rng.integers(0, 5, size=m))
        out = model.generate(params, src, 2, BeamConfig(beam_width=4, clusters=2, seed=seed))
        assert out
        for tokens, _ in out:
            assert len(tokens) == m and tokens[0] == 2
            assert model.unk_id not in tokens and model.eos_id not in tokens


def test_generation_rejects_bad_head():
    model, params = tiny_s2s()
    with pytest.raises(ValueError):
        model.generate(params, [0, 1], model.unk_id, BeamConfig())
    with pytest.raises(ValueError):
        model.generate(params, [], 0, BeamConfig())


def test_exhaustive_beam_matches_fixed_length_enumeration():
    # vocab 3 regular + unk + eos; the clause length is pinned to |src| = 4
    model, params = tiny_s2s(vocab=5, seed=21, hidden=3)
    src = [0, 2, 1, 1]
    scorer = model.scorer(params, src)
    eos = model.eos_id

    def next_lp(prefix):
        state = scorer.initial_state()
        for tok in prefix:
            state, lp = scorer.step(state, tok)
        lp = lp.copy()
        # eos masked with renormalisation before the final position, forced after it
        if len(prefix) < len(src):
            p = np.exp(lp)
            p[eos] = 0.0
            lp = np.log(np.maximum(p / p.sum(), 1e-300))
        return lp

    beam = BeamConfig(beam_width=27, clusters=1, ngram_block=99)
    tokens, lp = model.generate(params, src, 1, beam)[0]
    # brute force over the three non-head positions (unk excluded)
    best = None
    for cont in itertools.product([0, 1, 2], repeat=3):
        seq = (1,) + cont
        total = sum(float(next_lp(seq[:i])[seq[i]]) for i in range(1, 4))
        if best is None or (-total, seq) < best:
            best = (-total, seq)
    assert tuple(tokens) == best[1]
    assert lp == pytest.approx(-best[0], abs=1e-6)


def test_char_accuracy_bounds():
    model, params = tiny_s2s(vocab=8)
    pairs = [CoupletPair((0, 1), (2, 3))]
    acc = char_accuracy(model, params, pairs)
    assert 0.0 <= acc <= 1.0
    assert char_accuracy(model, params, [CoupletPair((0,), (2,))]) == 1.0
