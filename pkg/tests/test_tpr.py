import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stepgame.errors import DimensionMismatch, SentenceTooLong, TokenOutOfRange
from stepgame.tpr import (
    Dims,
    EncodedStory,
    ModelParams,
    Vocabulary,
    bind,
    decode,
    encode,
    episodes,
    forward,
    keys,
    layer_norm,
    memory_forward,
    param_count,
    pseudo_entities,
    tokenize,
    unbind,
)

TOY = Dims(d=4, d_e=3, d_r=2, hidden=4, vocab=10, nmax=5)
SMALL = Dims(d=16, d_e=8, d_r=5, hidden=12, vocab=30, nmax=8)


def test_bind_basis_role():
    f = np.array([1.0, 2.0, 3.0])
    M = bind([(f, np.array([1.0, 0.0, 0.0, 0.0]))])
    assert M.shape == (3, 4)
    np.testing.assert_array_equal(M[:, 0], f)
    assert not M[:, 1:].any()


def test_bind_empty_and_commutative():
    assert not bind([], shape=(3, 2)).any()
    rng = np.random.default_rng(0)
    pairs = [(rng.standard_normal(5), rng.standard_normal(3)) for _ in range(4)]
    np.testing.assert_allclose(bind(pairs), bind(pairs[::-1]), atol=1e-14)


def test_bind_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        bind([(np.ones(3), np.ones(2)), (np.ones(4), np.ones(2))])
    with pytest.raises(DimensionMismatch):
        unbind(np.ones((3, 2)), np.ones(3))


def test_unbind_orthonormal():
    rng = np.random.default_rng(1)
    roles, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    fs = rng.standard_normal((3, 7))
    M = bind([(fs[i], roles[:, i]) for i in range(3)])
    assert np.max(np.abs(unbind(M, roles[:, 1]) - fs[1])) <= 1e-12


def test_unbind_non_orthogonal_roles():
    f1, f2 = np.array([1.0, -2.0, 0.5]), np.array([3.0, 1.0, -1.0])
    r1 = np.array([1.0, 0.0])
    r2 = np.array([1.0, 1.0]) / np.sqrt(2)
    M = bind([(f1, r1), (f2, r2)])
    np.testing.assert_allclose(unbind(M, r2), f2 + f1 / np.sqrt(2), atol=1e-14)
    assert not unbind(M, np.zeros(2)).any()


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 40), st.integers(0, 2**31))
def test_recovery_property(n, seed):
    rng = np.random.default_rng(seed)
    roles, _ = np.linalg.qr(rng.standard_normal((40, 40)))
    fs = rng.standard_normal((n, 25))
    M = bind([(fs[i], roles[:, i]) for i in range(n)])
    err = max(np.max(np.abs(unbind(M, roles[:, i]) - fs[i])) for i in range(n))
    assert err <= 1e-10


def test_layer_norm_moments_and_zero():
    x = np.random.default_rng(2).uniform(-10, 10, (7, 3, 5))
    y = layer_norm(x)
    assert abs(y.mean()) <= 1e-6 and abs(y.var() - 1) <= 1e-6
    assert not layer_norm(np.zeros((3, 3))).any()
    assert not layer_norm(np.full(4, 2.5)).any()


def test_encode_single_word():
    p = ModelParams.init(TOY, 0)
    enc = encode([[3]], [4], p)
    np.testing.assert_allclose(enc.S[0], p.embeddings[3] * p.positions[0])


def test_encode_neutral_positions():
    p = ModelParams.init(TOY, 0)
    p.positions[:] = 1.0
    enc = encode([[1, 2, 5]], [1], p)
    np.testing.assert_allclose(enc.S[0], p.embeddings[[1, 2, 5]].mean(axis=0))


def test_encode_order_sensitive():
    p = ModelParams.init(TOY, 0)
    a = encode([[1, 2]], [1], p).S[0]
    b = encode([[2, 1]], [1], p).S[0]
    assert np.max(np.abs(a - b)) > 1e-6


def test_encode_errors():
    p = ModelParams.init(TOY, 0)
    with pytest.raises(TokenOutOfRange):
        encode([[10]], [1], p)
    with pytest.raises(SentenceTooLong):
        encode([[1] * 6], [1], p)


def test_first_layer_from_zero_memory():
    p = ModelParams.init(SMALL, 3)
    enc = encode([[1, 2, 3], [4, 5], [6]], [7, 8], p)
    ks = keys(enc, p)
    Ks = [ks.K(j) for j in (1, 2, 3)]
    zero = np.zeros((8, 5, 8))
    for K in Ks:
        assert not pseudo_entities(K, zero).any()
    expected = layer_norm(episodes(Ks[0], ks.E[1]) + episodes(Ks[2], ks.E[0]))
    np.testing.assert_allclose(memory_forward(enc, p, 1), expected, atol=1e-12)


def test_keys_are_outer_products():
    p = ModelParams.init(SMALL, 3)
    enc = encode([[1, 2], [3]], [4], p)
    ks = keys(enc, p)
    np.testing.assert_allclose(ks.K(3)[1], np.outer(ks.E[1][1], ks.R[2][1]))


def test_memory_shape_and_determinism():
    p = ModelParams.init(SMALL, 4)
    for m in (1, 3, 7):
        enc = encode([[1, 2]] * m, [3], p)
        for T in (1, 2, 5):
            M = memory_forward(enc, p, T)
            assert M.shape == (8, 5, 8)
            np.testing.assert_array_equal(M, memory_forward(enc, p, T))
    enc = encode([[1, 2], [4]], [3], p)
    assert np.max(np.abs(memory_forward(enc, p, 1) - memory_forward(enc, p, 3))) > 0


def test_memory_sentence_order_invariance():
    p = ModelParams.init(SMALL, 5)
    enc = encode([[1, 2], [3, 4, 5], [6], [7, 8]], [9], p)
    perm = [2, 0, 3, 1]
    shuffled = EncodedStory(enc.S[perm], enc.q)
    np.testing.assert_allclose(memory_forward(shuffled, p, 3), memory_forward(enc, p, 3), atol=1e-10)


def test_decode_normalised_and_positive():
    p = ModelParams.init(SMALL, 6)
    probs = forward([[1, 2], [3]], [4, 5], p, T=3)
    assert abs(probs.sum() - 1) <= 1e-9 and (probs > 0).all()


def test_decode_zero_memory_uniform():
    p = ModelParams.init(SMALL, 6)
    q = encode([[1]], [2], p).q
    probs = decode(np.zeros((8, 5, 8)), q, p)
    assert np.all(np.isfinite(probs))
    np.testing.assert_allclose(probs, 1 / 30)


def test_decode_argmax_stable_under_positive_scaling():
    p = ModelParams.init(SMALL, 7)
    enc = encode([[1, 2], [3]], [4], p)
    M = memory_forward(enc, p, 2)
    before = decode(M, enc.q, p)
    p.w_o *= 3.0
    after = decode(M, enc.q, p)
    assert before.argmax() == after.argmax()
    assert not np.allclose(before, after)


def test_decode_shape_errors():
    p = ModelParams.init(SMALL, 7)
    with pytest.raises(DimensionMismatch):
        decode(np.zeros((8, 5, 7)), np.zeros(16), p)


def test_finite_outputs_over_seeds():
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        p = ModelParams.init(SMALL, seed)
        m = int(rng.integers(1, 8))
        enc = EncodedStory(rng.uniform(-10, 10, (m, 16)), rng.uniform(-10, 10, 16))
        M = memory_forward(enc, p, 4)
        probs = decode(M, enc.q, p)
        assert np.all(np.isfinite(M)) and np.all(np.isfinite(probs))


def test_param_count_toy_dims():
    # embeddings 40, positions 20, output 30; MLPs 2*35 + 3*30 + 35 + 3*30 = 285; memory 18
    assert param_count(TOY) == 393
    assert ModelParams.init(TOY).count() == 393
    fixed = Dims(**{**TOY.__dict__, "trainable_initial_memory": False})
    assert param_count(fixed) == 375 == ModelParams.init(fixed).count()


def test_param_count_default_band():
    n = param_count(Dims(vocab=68, nmax=11))
    assert 3_400_000 <= n <= 4_600_000


def test_tokenize_and_vocab():
    assert tokenize("A is at B's 9 o'clock.") == ["a", "is", "at", "b's", "9", "o'clock", "."]
    v = Vocabulary.build(["A is above B."], extra=["overlap"])
    assert v.words[0] == "<pad>" and "overlap" in v.index
    assert v.ids("B is above A.") == [v.index[w] for w in ("b", "is", "above", "a", ".")]
