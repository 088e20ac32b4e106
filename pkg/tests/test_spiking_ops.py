import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snnconvert.spiking_ops import (AaState, aa_step, aw_step, diff_step, spike_layernorm,
                                    spike_softmax)
from snnconvert.tensor import DimensionError, layernorm, softmax


def spikes(rng, steps, shape, v_thr=1.0):
    return [v_thr * rng.integers(-1, 2, size=shape).astype(float) for _ in range(steps)]


def test_aw_zero_and_single_step(rng):
    w = rng.standard_normal((5, 3))
    assert not np.any(aw_step(w, np.zeros((2, 5))))
    x = rng.standard_normal((2, 5))
    np.testing.assert_allclose(aw_step(w, x), x @ w, atol=1e-14)


def test_aw_linearity(rng):
    w = rng.standard_normal((6, 4))
    xs = spikes(rng, 4, (3, 6), v_thr=0.37)
    total = sum(aw_step(w, x) for x in xs)
    np.testing.assert_allclose(total, sum(xs) @ w, rtol=0, atol=1e-12)


def test_aa_scalar_hand_case():
    st_ = AaState((1, 1), (1, 1))
    o1 = aa_step(st_, np.array([[1.0]]), np.array([[1.0]]))
    o2 = aa_step(st_, np.array([[0.0]]), np.array([[1.0]]))
    # O1 = 1*1 + 1*1 - 1*1, O2 = 1*1 + 0*2 - 0
    assert o1.tolist() == [[1.0]] and o2.tolist() == [[1.0]]
    assert (o1 + o2).tolist() == [[2.0]]


def test_aa_zero_query(rng):
    st_ = AaState((3, 2), (3, 2))
    for k in spikes(rng, 5, (3, 2)):
        assert not np.any(aa_step(st_, np.zeros((3, 2)), k))


def test_aa_matches_dense(rng):
    st_ = AaState((3, 2), (3, 2))
    qs, ks = spikes(rng, 5, (3, 2), 0.4), spikes(rng, 5, (3, 2), 0.7)
    total = sum(aa_step(st_, q, k) for q, k in zip(qs, ks))
    np.testing.assert_allclose(total, sum(qs) @ sum(ks).T, rtol=0, atol=1e-12)
    # replay check on the stored tracers
    assert np.array_equal(st_.s_a, _seq_sum(qs))
    assert np.array_equal(st_.s_b, _seq_sum(ks))


def _seq_sum(xs):
    acc = np.zeros_like(xs[0])
    for x in xs:
        acc = acc + x
    return acc


def test_aa_untransposed_batched(rng):
    st_ = AaState((2, 4, 4), (2, 4, 3), transpose_b=False)
    a_s, b_s = spikes(rng, 6, (2, 4, 4), 0.1), spikes(rng, 6, (2, 4, 3), 0.3)
    total = sum(aa_step(st_, a, b) for a, b in zip(a_s, b_s))
    np.testing.assert_allclose(total, sum(a_s) @ sum(b_s), rtol=0, atol=1e-12)


def test_aa_shape_error():
    with pytest.raises(DimensionError):
        aa_step(AaState((2, 2), (2, 2)), np.zeros((2, 3)), np.zeros((2, 2)))


def test_spike_softmax_hand_case():
    st_ = spike_softmax((2,))
    o1 = diff_step(st_, np.array([1.0, 0.0]))
    np.testing.assert_allclose(o1, [0.7310586, 0.2689414], atol=5e-8)
    o2 = diff_step(st_, np.array([0.0, 1.0]))
    np.testing.assert_allclose(o2, [-0.2310586, 0.2310586], atol=5e-8)
    np.testing.assert_allclose(o1 + o2, [0.5, 0.5], atol=1e-15)


@pytest.mark.parametrize("make", [lambda: spike_softmax((3, 4)),
                                  lambda: spike_layernorm((3, 4), np.full(4, 1.3), np.full(4, -0.2))])
def test_zero_input_after_settling_is_exactly_zero(rng, make):
    st_ = make()
    diff_step(st_, rng.standard_normal((3, 4)))
    diff_step(st_, rng.standard_normal((3, 4)))
    assert not np.any(diff_step(st_, np.zeros((3, 4))))


def test_diff_shape_error():
    with pytest.raises(DimensionError):
        diff_step(spike_softmax((2,)), np.zeros(3))


dims = st.sampled_from([1, 2, 4, 8])


@settings(max_examples=100)
@given(dims, dims, st.integers(1, 16), st.integers(0, 2**32 - 1))
def test_aa_telescoping_property(n, d, steps, seed):
    rng = np.random.default_rng(seed)
    st_ = AaState((n, d), (n, d))
    qs, ks = spikes(rng, steps, (n, d), rng.uniform(0.01, 2)), spikes(rng, steps, (n, d), rng.uniform(0.01, 2))
    total = sum(aa_step(st_, q, k) for q, k in zip(qs, ks))
    np.testing.assert_allclose(total, sum(qs) @ sum(ks).T, rtol=0, atol=1e-10)


@settings(max_examples=100)
@given(st.integers(1, 16), st.integers(1, 6), st.integers(2, 9), st.integers(0, 2**32 - 1))
def test_diff_telescoping_property(steps, rows, cols, seed):
    rng = np.random.default_rng(seed)
    xs = [rng.normal(scale=2.0, size=(rows, cols)) for _ in range(steps)]
    gamma, beta = rng.standard_normal(cols), rng.standard_normal(cols)
    for st_, sigma in ((spike_softmax((rows, cols)), softmax),
                       (spike_layernorm((rows, cols), gamma, beta), lambda x: layernorm(x, gamma, beta))):
        total = sum(diff_step(st_, x) for x in xs)
        np.testing.assert_allclose(total, sigma(_seq_sum(xs)), rtol=0, atol=1e-12)
