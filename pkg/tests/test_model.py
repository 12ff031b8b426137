import numpy as np
import pytest
from scipy.special import expit

from advalstm.errors import ShapeError
from advalstm.model import (
    ModelDims,
    ParamSet,
    backward,
    classify,
    forward,
    head_confidence,
    init_params,
    predict,
    softmax,
)
from advalstm.synthetic import make_regime_examples

from helpers import finite_difference_gradient, max_relative_error


def reference_forward(x, p):
    """Independent plain-loop implementation of the whole network."""
    steps = x.shape[0]
    m = np.tanh(x @ p.w_map.T + p.b_map)
    hidden = p.w_i.shape[0]
    h_prev = np.zeros(hidden)
    c_prev = np.zeros(hidden)
    hs = []
    for t in range(steps):
        z = np.concatenate([m[t], h_prev])
        i = expit(p.w_i @ z + p.b_i)
        f = expit(p.w_f @ z + p.b_f)
        o = expit(p.w_o @ z + p.b_o)
        g = np.tanh(p.w_g @ z + p.b_g)
        c = f * c_prev + i * g
        h = o * np.tanh(c)
        hs.append(h)
        h_prev, c_prev = h, c
    hs = np.array(hs)
    logits = np.array([p.u_att @ np.tanh(p.w_att @ h + p.b_att) for h in hs])
    w = np.exp(logits - logits.max())
    w = w / w.sum()
    pooled = (w[:, None] * hs).sum(axis=0)
    e = np.concatenate([pooled, hs[-1]])
    return e, float(p.w_head @ e + p.b_head)


class TestDims:
    def test_att_size_defaults_to_hidden(self):
        dims = ModelDims(feat_dim=11, map_size=8, hidden_size=16, att_size=0)
        assert dims.att_size == 16

    def test_rejects_non_positive_sizes(self):
        with pytest.raises(ShapeError):
            ModelDims(feat_dim=0, map_size=4, hidden_size=4, att_size=4)
        with pytest.raises(ShapeError):
            ModelDims(feat_dim=11, map_size=-1, hidden_size=4, att_size=4)


class TestInit:
    def test_seed_determinism(self, small_dims):
        a = init_params(small_dims, np.random.default_rng(7))
        b = init_params(small_dims, np.random.default_rng(7))
        for (_, x), (_, y) in zip(a.items(), b.items()):
            np.testing.assert_array_equal(x, y)

    def test_forget_bias_is_one_other_biases_zero(self, small_params):
        np.testing.assert_array_equal(small_params.b_f, np.ones_like(small_params.b_f))
        for name in ("b_map", "b_i", "b_o", "b_g", "b_att"):
            np.testing.assert_array_equal(
                getattr(small_params, name), np.zeros_like(getattr(small_params, name))
            )
        assert small_params.b_head == 0.0

    def test_weight_ranges(self, small_dims):
        p = init_params(small_dims, np.random.default_rng(0))
        r = np.sqrt(6.0 / (small_dims.feat_dim + small_dims.map_size))
        assert np.all(np.abs(p.w_map) <= r)

    def test_vector_round_trip(self, small_params):
        vec = small_params.to_vector()
        again = small_params.from_vector(vec)
        np.testing.assert_array_equal(again.to_vector(), vec)
        with pytest.raises(ShapeError):
            small_params.from_vector(vec[:-1])


class TestSoftmax:
    def test_sums_to_one(self):
        rng = np.random.default_rng(0)
        s = softmax(rng.standard_normal((4, 7)))
        np.testing.assert_allclose(s.sum(axis=-1), 1.0, atol=1e-12)

    def test_shift_invariance(self):
        logits = np.array([0.3, -1.2, 2.0])
        np.testing.assert_allclose(softmax(logits), softmax(logits + 123.0), atol=1e-12)

    def test_constant_logits_uniform(self):
        np.testing.assert_allclose(softmax(np.full(5, 3.0)), np.full(5, 0.2), atol=1e-15)


class TestForward:
    def test_zero_params_give_zero_confidence(self, small_dims):
        p = init_params(small_dims, np.random.default_rng(0)).zeros_like()
        x = np.random.default_rng(1).standard_normal((3, 11))
        trace = forward(x, p)
        assert trace.yhat == 0.0
        np.testing.assert_array_equal(trace.e, np.zeros_like(trace.e))
        np.testing.assert_allclose(trace.att.weights, np.full(3, 1.0 / 3.0), atol=1e-15)
        assert classify(trace.yhat) == 1.0

    def test_mapping_saturates_to_one(self, small_params):
        x = np.full((2, 11), 1e6)
        trace = forward(x, small_params)
        signs = np.sign(small_params.w_map.sum(axis=1))
        np.testing.assert_allclose(trace.m[0], signs, atol=1e-9)

    def test_matches_reference_implementation(self, small_params):
        rng = np.random.default_rng(9)
        for _ in range(5):
            x = rng.standard_normal((4, 11))
            e_ref, yhat_ref = reference_forward(x, small_params)
            trace = forward(x, small_params)
            np.testing.assert_allclose(trace.e, e_ref, rtol=1e-12, atol=1e-12)
            assert trace.yhat == pytest.approx(yhat_ref, rel=1e-12, abs=1e-12)

    def test_attention_weights_sum_to_one(self, small_params):
        x = np.random.default_rng(2).standard_normal((6, 11))
        trace = forward(x, small_params)
        assert trace.att.weights.sum() == pytest.approx(1.0, abs=1e-12)

    def test_single_step_attention_is_trivial(self, small_params):
        x = np.random.default_rng(3).standard_normal((1, 11))
        trace = forward(x, small_params)
        np.testing.assert_allclose(trace.att.weights, [1.0], atol=1e-15)
        np.testing.assert_allclose(trace.att.pooled, trace.lstm.h[0], atol=1e-15)
        np.testing.assert_allclose(
            trace.e, np.concatenate([trace.lstm.h[0], trace.lstm.h[0]]), atol=1e-15
        )

    def test_head_is_a_dot_product(self, small_dims):
        p = init_params(small_dims, np.random.default_rng(0)).zeros_like()
        e = np.array([0.5, -0.5, 1.0, 0.0, 0.25, 0.25, -1.0, 2.0])
        w = np.array([1.0, 1.0, 0.5, 3.0, 2.0, 2.0, 0.0, 0.25])
        p.w_head[...] = w
        p.b_head[...] = 0.5
        assert head_confidence(e, p) == pytest.approx(float(w @ e) + 0.5)
        # 1*1 + 1*0.5 = 1.5 through the weights, plus the 0.5 bias.
        e2 = np.array([1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0])
        assert head_confidence(e2, p) == pytest.approx(2.0, abs=1e-15)

    def test_batch_matches_per_example(self, small_params):
        x, _ = make_regime_examples(10, lag=4, seed=0)
        batched = predict(x, small_params)
        singles = np.array([predict(x[i], small_params) for i in range(10)])
        np.testing.assert_allclose(batched, singles, rtol=1e-15, atol=1e-15)

    def test_classify_tie_goes_positive(self):
        np.testing.assert_array_equal(
            classify(np.array([-0.1, 0.0, 0.1])), np.array([-1.0, 1.0, 1.0])
        )


class TestBackward:
    def test_zero_upstream_gives_zero_grads(self, small_params):
        x = np.random.default_rng(4).standard_normal((3, 11))
        trace = forward(x, small_params)
        grads, d_e = backward(small_params, trace, np.asarray(0.0))
        assert np.all(grads.to_vector() == 0.0)
        np.testing.assert_array_equal(d_e, np.zeros_like(d_e))

    def test_de_is_head_weight_for_unit_upstream(self, small_params):
        x = np.random.default_rng(5).standard_normal((3, 11))
        trace = forward(x, small_params)
        _, d_e = backward(small_params, trace, np.asarray(1.0))
        np.testing.assert_allclose(d_e, small_params.w_head, atol=1e-15)

    def test_upstream_shape_checked(self, small_params):
        x = np.random.default_rng(6).standard_normal((3, 11))
        trace = forward(x, small_params)
        with pytest.raises(ShapeError):
            backward(small_params, trace, np.ones(2))

    def test_gradcheck_sum_of_confidences(self, small_params):
        rng = np.random.default_rng(11)
        x = rng.standard_normal((5, 3, 11))

        def total(p):
            return float(np.sum(forward(x, p).yhat))

        trace = forward(x, small_params)
        grads, _ = backward(small_params, trace, np.ones(5))
        numeric = finite_difference_gradient(total, small_params)
        assert max_relative_error(grads.to_vector(), numeric) < 1e-6

    def test_gradcheck_injected_representation_branch(self, small_params):
        rng = np.random.default_rng(12)
        x = rng.standard_normal((4, 3, 11))
        offset = 0.1 * rng.standard_normal((4, 8))

        def total(p):
            trace = forward(x, p)
            return float(np.sum(trace.yhat) + np.sum(head_confidence(trace.e + offset, p)))

        trace = forward(x, small_params)
        grads, _ = backward(
            small_params, trace, np.ones(4), d_yhat_adv=np.ones(4), e_adv=trace.e + offset
        )
        numeric = finite_difference_gradient(total, small_params)
        assert max_relative_error(grads.to_vector(), numeric) < 1e-6
