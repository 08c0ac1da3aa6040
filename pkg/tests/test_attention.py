import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from attnlab.attention import (HeadParams, attention_forward, dnas_weights, hnas_weights, logits,
                               padded_query_transform, split_heads, unas_weights)
from attnlab.gradients import random_instance
from conftest import KERNEL, frac_col_normalize, frac_row_normalize, to_float

UNAS_ORACLE = frac_row_normalize(KERNEL)
DNAS_ORACLE = frac_row_normalize(frac_col_normalize(KERNEL))


def test_logits_examples():
    np.testing.assert_array_equal(logits(np.eye(2), np.eye(2)), np.eye(2))
    np.testing.assert_array_equal(logits([[1.0, 1.0]], [[2.0, 3.0]]), [[5.0]])
    np.testing.assert_array_equal(logits([[1.0, 0.0]], [[0.0, 1.0], [0.0, -2.0]]), [[0.0, 0.0]])
    with pytest.raises(ValueError, match="query dim"):
        logits(np.ones((2, 3)), np.ones((2, 2)))


def test_scheme_oracles(backend, z_rational):
    np.testing.assert_array_equal(dnas_weights(np.zeros((2, 2))), 0.5)
    np.testing.assert_allclose(unas_weights(z_rational), to_float(UNAS_ORACLE), atol=1e-12)
    d = dnas_weights(z_rational)
    np.testing.assert_allclose(d, to_float(DNAS_ORACLE), atol=1e-12)
    np.testing.assert_allclose(d.sum(axis=0), [55 / 56, 57 / 56], atol=1e-12)
    assert d.sum(axis=0).min() >= 0.5


def test_dnas_rescues_explained_away_column():
    z = np.array([[25.0, 0.0], [25.0, 0.0]])
    np.testing.assert_array_equal(dnas_weights(z), 0.5)
    mass = unas_weights(z).sum(axis=0)[1]
    assert mass == pytest.approx(2 * np.exp(-25), rel=1e-9)
    assert mass < 1e-8


def test_hnas_examples(z_rational):
    np.testing.assert_array_equal(hnas_weights(z_rational, 0.0), unas_weights(z_rational))
    np.testing.assert_array_equal(hnas_weights(z_rational, 1.0), dnas_weights(z_rational))
    np.testing.assert_allclose(hnas_weights(z_rational, 0.5), [[17 / 56, 39 / 56], [9 / 16, 7 / 16]], atol=1e-12)
    np.testing.assert_allclose(hnas_weights(z_rational, 0.5), [[0.303571428571, 0.696428571429], [0.5625, 0.4375]],
                               atol=1e-11)
    with pytest.raises(ValueError, match="outside"):
        hnas_weights(z_rational, 1.5)


def test_head_params_u_mapping():
    I = np.eye(2)
    assert HeadParams(I, I, I).u == 0.5
    assert HeadParams.with_u(I, I, I, 0.1).u == pytest.approx(0.1, abs=1e-15)
    assert HeadParams.with_u(I, I, I, 0.0).u == 0.0
    assert HeadParams.with_u(I, I, I, 1.0).u == 1.0
    with pytest.raises(ValueError):
        HeadParams(I, I, np.eye(3))


@pytest.mark.parametrize("scheme", ["unas", "dnas", "hnas"])
def test_single_position(scheme):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(1, 3))
    hp = HeadParams(*(rng.normal(size=(3, 3)) for _ in range(3)))
    out = attention_forward(x, [hp], scheme)
    np.testing.assert_array_equal(out.weights, [[[1.0]]])
    np.testing.assert_allclose(out.output, x @ hp.V.T, atol=1e-15)


@pytest.mark.parametrize("scheme", ["unas", "dnas", "hnas"])
def test_uniform_weights_average_inputs(scheme):
    x = np.random.default_rng(1).normal(size=(5, 3))
    zero = np.zeros((3, 3))
    out = attention_forward(x, [HeadParams(zero, zero, np.eye(3))], scheme)
    np.testing.assert_allclose(out.output, np.broadcast_to(x.mean(axis=0), x.shape), atol=1e-15)


def test_identity_transforms_compose_oracles():
    x = np.eye(2)
    out = attention_forward(x, [HeadParams(x, x, x)], "dnas")
    np.testing.assert_allclose(out.output, dnas_weights(logits(x, x)) @ x, atol=1e-15)


def test_shape_violations():
    x = np.ones((3, 4))
    with pytest.raises(ValueError, match="head dims"):
        attention_forward(x, [HeadParams(*(np.ones((3, 4)),) * 3)])
    with pytest.raises(ValueError, match="scheme"):
        attention_forward(x, [HeadParams(*(np.ones((4, 4)),) * 3)], "softmax")


def test_padded_query_construction():
    Q = np.arange(12.0).reshape(3, 4)
    np.testing.assert_array_equal(padded_query_transform(np.arange(16.0).reshape(4, 4), 0, 1),
                                  np.arange(16.0).reshape(4, 4))
    Qh = np.ones((2, 4))
    P = padded_query_transform(Qh, 0, 2)
    np.testing.assert_array_equal(P[:2], Qh)
    np.testing.assert_array_equal(P[2:], 0.0)
    with pytest.raises(ValueError, match="out of range"):
        padded_query_transform(Qh, 2, 2)
    with pytest.raises(ValueError):
        padded_query_transform(Q, 0, 2)


def test_padded_query_equivalence():
    rng = np.random.default_rng(7)
    for _ in range(20):
        H = int(rng.integers(1, 4))
        D = H * int(rng.integers(1, 4))
        x = rng.normal(size=(int(rng.integers(1, 6)), D))
        Qfull, K = rng.normal(size=(D, D)), rng.normal(size=(D, D))
        for h, (Qh, Kh) in enumerate(zip(split_heads(Qfull, H), split_heads(K, H))):
            padded = logits(x @ padded_query_transform(Qh, h, H).T, x @ K.T)
            np.testing.assert_allclose(padded, logits(x @ Qh.T, x @ Kh.T), atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), S=st.integers(1, 7), H=st.sampled_from([1, 2]), scheme=st.sampled_from(
    ["unas", "dnas", "hnas"]), causal=st.booleans())
def test_forward_properties(seed, S, H, scheme, causal):
    rng = np.random.default_rng(seed)
    x, params = random_instance(rng, S, 2 * H, H)
    x = 3 * x
    mask = np.tril(np.ones((S, S), dtype=bool)) if causal else None
    out = attention_forward(x, params, scheme, mask)
    np.testing.assert_allclose(out.weights.sum(axis=2), 1.0, atol=1e-10)
    if scheme == "dnas":
        assert out.weights.sum(axis=1).min() >= 1.0 / S - 1e-12
    if causal:
        assert np.all(out.weights[:, ~mask] == 0.0)
    perm = rng.permutation(S)
    pmask = None if mask is None else mask[np.ix_(perm, perm)]
    permuted = attention_forward(x[perm], params, scheme, pmask)
    np.testing.assert_allclose(permuted.output, out.output[perm], atol=1e-12)
    np.testing.assert_allclose(permuted.weights, out.weights[:, perm][:, :, perm], atol=1e-12)


def test_heads_match_single_head_calls():
    rng = np.random.default_rng(3)
    x, params = random_instance(rng, 5, 6, 3)
    out = attention_forward(x, params, "hnas")
    for h, hp in enumerate(params):
        z = logits(x @ hp.Q.T, x @ hp.K.T)
        np.testing.assert_array_equal(out.weights[h], hnas_weights(z, hp.u))
        np.testing.assert_allclose(out.output[:, 2 * h:2 * h + 2], out.weights[h] @ (x @ hp.V.T), atol=1e-15)
