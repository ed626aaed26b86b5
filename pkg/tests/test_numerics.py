import math

import numpy as np
import pytest

from ufnd.autograd import Parameter, Tensor
from ufnd.errors import ArgumentError, NonFiniteError
from ufnd.numerics import (AdamState, RngStreams, adam_step, assert_all_finite,
                           clip_global_norm, dropout, gelu, grad_check,
                           layer_norm, log_softmax, masked_softmax, nll_loss,
                           relu, xavier_init)


class TestLogSoftmax:
    def test_symmetric_pair(self):
        out = log_softmax(Tensor(np.array([[0.0, 0.0]])))
        np.testing.assert_allclose(out.data, [[-math.log(2)] * 2], atol=1e-7)

    def test_single_element(self):
        out = log_softmax(Tensor(np.array([[5.0]])))
        np.testing.assert_allclose(out.data, [[0.0]], atol=1e-7)

    def test_large_values_stay_finite(self):
        out = log_softmax(Tensor(np.array([[1000.0, 0.0]])))
        assert np.all(np.isfinite(out.data))

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(-1e4, 1e4, size=(500, 7))
        out = log_softmax(Tensor(x))
        np.testing.assert_allclose(np.exp(out.data).sum(axis=-1), 1.0,
                                   atol=1e-6)

    def test_gradient(self):
        x = Parameter(np.array([[1.0, 2.0, 3.0]]), "x")
        out = log_softmax(x)
        loss = nll_loss(out, np.array([1]))
        loss.backward()
        softmax = np.exp(out.data[0])
        expected = softmax.copy()
        expected[1] -= 1.0
        np.testing.assert_allclose(x.grad[0], expected, atol=1e-7)


class TestGelu:
    def test_zero(self):
        assert gelu(Tensor(np.array([0.0]))).data[0] == 0.0

    def test_asymptote(self):
        assert abs(gelu(Tensor(np.array([10.0]))).data[0] - 10.0) < 1e-6

    def test_value_against_erf_oracle(self):
        # independent evaluation of x * Phi(x) via math.erf
        x = 1.0
        expected = x * 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))
        assert abs(expected - 0.8413447) < 1e-6
        assert abs(gelu(Tensor(np.array([x]))).data[0] - expected) < 1e-6

    def test_gradient_finite_difference(self):
        x = Parameter(np.linspace(-3, 3, 13), "x")
        gelu(x).backward()
        eps = 1e-6
        numeric = (gelu(Tensor(x.data + eps)).data
                   - gelu(Tensor(x.data - eps)).data) / (2 * eps)
        np.testing.assert_allclose(x.grad, numeric, atol=1e-6)


class TestLayerNorm:
    def _gain_bias(self, d, dtype=np.float64):
        return (Parameter(np.ones(d, dtype=dtype), "g"),
                Parameter(np.zeros(d, dtype=dtype), "b"))

    def test_constant_row_zeros(self):
        g, b = self._gain_bias(4)
        out = layer_norm(Tensor(np.full((1, 4), 7.0)), g, b)
        np.testing.assert_allclose(out.data, 0.0, atol=1e-6)

    def test_mean_zero_variance_one(self):
        rng = np.random.default_rng(1)
        g, b = self._gain_bias(16)
        out = layer_norm(Tensor(rng.standard_normal((32, 16))), g, b,
                         eps=1e-12)
        np.testing.assert_allclose(out.data.mean(axis=-1), 0.0, atol=1e-5)
        np.testing.assert_allclose(out.data.var(axis=-1), 1.0, atol=1e-5)

    def test_hand_case(self):
        g, b = self._gain_bias(3)
        out = layer_norm(Tensor(np.array([[1.0, 2.0, 3.0]])), g, b, eps=1e-12)
        r = math.sqrt(3.0 / 2.0)
        np.testing.assert_allclose(out.data, [[-r, 0.0, r]], atol=1e-6)

    def test_gradient_finite_difference(self):
        rng = np.random.default_rng(2)
        x = Parameter(rng.standard_normal((2, 5)), "x")
        g = Parameter(rng.standard_normal(5), "g")
        b = Parameter(rng.standard_normal(5), "b")
        res = grad_check(lambda: nll_loss(
            log_softmax(layer_norm(x, g, b)), np.array([0, 1])),
            [x, g, b], eps=1e-6, abs_floor=1e-10, n_samples=20)
        assert res.max_rel_error < 1e-4


class TestDropout:
    def test_eval_identity(self):
        x = Tensor(np.ones((4, 4)))
        rng = np.random.default_rng(0)
        assert dropout(x, 0.5, "eval", rng) is x

    def test_rate_zero_identity(self):
        x = Tensor(np.ones((4, 4)))
        assert dropout(x, 0.0, "train", np.random.default_rng(0)) is x

    def test_kept_fraction_and_mean(self):
        rng = np.random.default_rng(3)
        x = Tensor(np.ones(10 ** 6))
        out = dropout(x, 0.1, "train", rng)
        kept = np.count_nonzero(out.data) / x.data.size
        assert abs(kept - 0.9) < 0.01
        assert abs(out.data.mean() - 1.0) < 0.01

    def test_bad_rate(self):
        with pytest.raises(ArgumentError):
            dropout(Tensor(np.ones(2)), 1.0, "train", np.random.default_rng(0))


class TestMaskedSoftmax:
    def test_masked_keys_get_exact_zero(self):
        scores = Tensor(np.random.default_rng(0).standard_normal((2, 3, 4, 5)))
        mask = np.array([[1, 1, 1, 0, 0], [1, 1, 1, 1, 1]], dtype=np.float32)
        out = masked_softmax(scores, mask)
        assert np.all(out.data[0, :, :, 3:] == 0.0)
        np.testing.assert_allclose(out.data.sum(axis=-1), 1.0, atol=1e-6)


class TestXavierInit:
    def test_bound_for_300x300(self):
        rng = np.random.default_rng(0)
        w = xavier_init((300, 300), rng)
        assert np.all(np.abs(w) <= math.sqrt(6.0 / 600) + 1e-9)
        assert math.isclose(math.sqrt(6.0 / 600), 0.1)

    def test_empirical_variance(self):
        rng = np.random.default_rng(1)
        w = xavier_init((500, 200), rng)  # 1e5 draws
        target = 2.0 / (500 + 200)
        assert abs(w.var() - target) / target < 0.10

    def test_determinism(self):
        a = xavier_init((10, 10), np.random.default_rng(7))
        b = xavier_init((10, 10), np.random.default_rng(7))
        np.testing.assert_array_equal(a, b)


class TestClipGlobalNorm:
    def _params(self, grads):
        out = []
        for i, g in enumerate(grads):
            p = Parameter(np.zeros_like(g), f"p{i}")
            p.grad = g.copy()
            out.append(p)
        return out

    def test_scaling(self):
        params = self._params([np.array([6.0, 8.0])])  # norm 10
        pre = clip_global_norm(params, 1.0)
        assert abs(pre - 10.0) < 1e-6
        np.testing.assert_allclose(params[0].grad, [0.6, 0.8], atol=1e-6)

    def test_noop_below_clip(self):
        params = self._params([np.array([0.3, 0.4])])  # norm 0.5
        clip_global_norm(params, 1.0)
        np.testing.assert_array_equal(params[0].grad, [0.3, 0.4])

    def test_post_norm_bounded_property(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            grads = [rng.standard_normal(rng.integers(1, 20)) * 10
                     for _ in range(rng.integers(1, 5))]
            params = self._params(grads)
            clip_global_norm(params, 1.0)
            post = math.sqrt(sum(float((p.grad ** 2).sum()) for p in params))
            assert post <= 1.0 * (1 + 1e-6)


class TestAdam:
    def test_first_step_magnitude(self):
        p = Parameter(np.array([0.0]), "w")
        p.grad = np.array([1.0])
        state = AdamState.for_param(p, lr=0.003)
        adam_step(p, state)
        assert abs(abs(p.data[0]) - 0.003) < 1e-6

    def test_zero_gradient_identity(self):
        p = Parameter(np.array([1.5, -2.5]), "w")
        state = AdamState.for_param(p, lr=0.003)
        for _ in range(5):
            p.grad = np.zeros(2)
            adam_step(p, state)
        np.testing.assert_array_equal(p.data, [1.5, -2.5])

    def test_quadratic_descent(self):
        # scalar simulation oracle: f(w) = w^2, gradient 2w
        p = Parameter(np.array([1.0]), "w")
        state = AdamState.for_param(p, lr=0.003)
        values = [abs(p.data[0])]
        for _ in range(10):
            p.grad = 2.0 * p.data
            adam_step(p, state)
            values.append(abs(p.data[0]))
        assert all(b < a for a, b in zip(values, values[1:]))


class TestNllLoss:
    def test_hand_case(self):
        lp = Tensor(np.array([[-math.log(2), -math.log(2)]]))
        assert abs(nll_loss(lp, np.array([0])).item() - math.log(2)) < 1e-6

    def test_confident_correct(self):
        lp = Tensor(np.array([[0.0, -30.0]]))
        assert nll_loss(lp, np.array([0])).item() < 1e-9

    def test_batch_mean(self):
        lp = Tensor(np.array([[-1.0, -2.0], [-3.0, -4.0]]))
        loss = nll_loss(lp, np.array([0, 1]))
        assert abs(loss.item() - (1.0 + 4.0) / 2) < 1e-6

    def test_gradient_structure(self):
        lp = Parameter(np.array([[-1.0, -2.0], [-3.0, -4.0]]), "lp")
        nll_loss(lp, np.array([0, 1])).backward()
        np.testing.assert_allclose(lp.grad, [[-0.5, 0.0], [0.0, -0.5]])

    def test_bad_target(self):
        with pytest.raises(ArgumentError):
            nll_loss(Tensor(np.zeros((1, 2))), np.array([2]))


class TestRngStreams:
    def test_same_seed_same_sequence(self):
        a = RngStreams(42).stream("dropout").random(5)
        b = RngStreams(42).stream("dropout").random(5)
        np.testing.assert_array_equal(a, b)

    def test_streams_independent(self):
        streams = RngStreams(42)
        a = streams.stream("init").random(5)
        b = streams.stream("dropout").random(5)
        assert not np.array_equal(a, b)

    def test_state_roundtrip(self):
        streams = RngStreams(1)
        streams.stream("dropout").random(10)
        saved = streams.state()
        expected = streams.stream("dropout").random(5)
        streams.restore(saved)
        np.testing.assert_array_equal(streams.stream("dropout").random(5),
                                      expected)


class TestGradCheck:
    def _toy(self, seed=0):
        rng = np.random.default_rng(seed)
        w = Parameter(rng.standard_normal((2, 4)).astype(np.float32), "w")
        b = Parameter(np.zeros(2, dtype=np.float32), "b")
        x = Tensor(rng.standard_normal((6, 4)).astype(np.float32))
        y = rng.integers(0, 2, size=6)
        from ufnd import autograd as ag
        return w, b, lambda: nll_loss(log_softmax(ag.linear(x, w, b)), y)

    def test_linear_nll_toy(self):
        w, b, loss_fn = self._toy()
        res = grad_check(loss_fn, [w, b], eps=1e-3, n_samples=10)
        assert res.max_rel_error < 1e-3

    def test_zero_parameter_vacuous(self):
        res = grad_check(lambda: Tensor(np.array(0.0)), [], eps=1e-3)
        assert res.max_rel_error == 0.0 and res.n_checked == 0

    def test_sign_flip_detected(self):
        w, b, loss_fn = self._toy()

        def corrupted():
            out = loss_fn()
            real_bwd = out._backward

            def flipped(g):
                real_bwd(-g)  # wrong sign everywhere upstream
            out._backward = flipped
            return out

        res = grad_check(corrupted, [w, b], eps=1e-3, n_samples=10)
        assert res.max_rel_error > 0.1


class TestCheckedMode:
    def test_non_finite_named(self):
        p = Parameter(np.array([1.0, np.nan]), "encoder/block1/attn_q/w")
        with pytest.raises(NonFiniteError, match="attn_q"):
            assert_all_finite([p])

    def test_relu_gradient(self):
        x = Parameter(np.array([-1.0, 0.0, 2.0]), "x")
        relu(x).backward()
        np.testing.assert_array_equal(x.grad, [0.0, 0.0, 1.0])
