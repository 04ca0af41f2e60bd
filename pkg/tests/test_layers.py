"""Layer primitives: oracle equivalence, semantics, gradients."""

import numpy as np
import pytest

from eegbbnet.errors import ParameterError, ShapeError, StatisticsError
from eegbbnet.neural import Adam, softmax, softmax_cross_entropy
from eegbbnet.neural.layers import (
    BatchNorm,
    batch_norm,
    depthwise_conv_time,
    dropout,
    max_pool_time,
)
from eegbbnet.neural.tensor import Tensor, tensor_sum

from oracles import adam_oracle, batch_norm_oracle, conv_valid_oracle, sliding_max_oracle
from test_tensor import check_gradient


class TestDepthwiseConv:
    def test_impulse_kernel_is_identity(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(3, 100))
        kernels = np.zeros((3, 64))
        kernels[:, 0] = 1.0
        out = depthwise_conv_time(Tensor(x), Tensor(kernels)).data
        np.testing.assert_allclose(out, x[:, : 100 - 63], atol=1e-12)

    def test_constant_input_gives_kernel_sum(self):
        kernels = np.random.default_rng(1).normal(size=(2, 8))
        x = np.full((2, 20), 3.0)
        out = depthwise_conv_time(Tensor(x), Tensor(kernels)).data
        want = np.broadcast_to(3.0 * kernels.sum(axis=1, keepdims=True), out.shape)
        np.testing.assert_allclose(out, want, atol=1e-10)

    def test_matches_nested_loop_oracle(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(2, 70))
        kernels = rng.normal(size=(2, 64))
        out = depthwise_conv_time(Tensor(x), Tensor(kernels)).data
        np.testing.assert_allclose(out, conv_valid_oracle(x, kernels), atol=1e-12)

    def test_batch_matches_per_sample(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(4, 2, 30))
        kernels = rng.normal(size=(2, 7))
        batched = depthwise_conv_time(Tensor(x), Tensor(kernels)).data
        for b in range(4):
            np.testing.assert_allclose(batched[b], conv_valid_oracle(x[b], kernels), atol=1e-12)

    def test_too_short_input_rejected(self):
        with pytest.raises(ShapeError):
            depthwise_conv_time(Tensor(np.zeros((2, 10))), Tensor(np.zeros((2, 16))))

    def test_gradients_with_bias(self):
        rng = np.random.default_rng(4)
        check_gradient(
            lambda x, k, b: tensor_sum(depthwise_conv_time(x, k, b) ** 2),
            [rng.normal(size=(2, 3, 20)), rng.normal(size=(3, 5)), rng.normal(size=3)],
        )


class TestMaxPool:
    def test_monotone_rows_take_window_end(self):
        x = np.arange(20.0).reshape(1, 20)
        out = max_pool_time(Tensor(x), 4).data
        np.testing.assert_array_equal(out[0], x[0, 3:])

    def test_window_one_is_identity(self):
        x = np.random.default_rng(5).normal(size=(2, 9))
        np.testing.assert_array_equal(max_pool_time(Tensor(x), 1).data, x)

    def test_matches_sliding_oracle(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(1, 40))
        out = max_pool_time(Tensor(x), 32).data
        np.testing.assert_array_equal(out, sliding_max_oracle(x, 32))

    def test_matches_oracle_many_shapes(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            t = int(rng.integers(5, 50))
            w = int(rng.integers(2, t + 1))
            x = rng.integers(-3, 4, size=(3, t)).astype(np.float64)
            out = max_pool_time(Tensor(x), w).data
            np.testing.assert_array_equal(out, sliding_max_oracle(x, w))

    def test_gradient_routes_to_lowest_tied_index(self):
        x = Tensor(np.array([[1.0, 5.0, 5.0, 0.0]]), requires_grad=True)
        tensor_sum(max_pool_time(x, 2)).backward()
        # windows: [1,5] -> idx1, [5,5] -> idx1 (tie, lowest), [5,0] -> idx2
        np.testing.assert_array_equal(x.grad, [[0.0, 2.0, 1.0, 0.0]])

    def test_gradients_random(self):
        rng = np.random.default_rng(8)
        check_gradient(
            lambda x: tensor_sum(max_pool_time(x, 3) ** 2),
            [rng.normal(size=(2, 2, 12))],
        )

    def test_too_small_input_rejected(self):
        with pytest.raises(ShapeError):
            max_pool_time(Tensor(np.zeros((2, 4))), 8)


class TestBatchNorm:
    def test_train_mode_standardizes(self):
        rng = np.random.default_rng(9)
        x = rng.normal(3.0, 2.5, size=(64, 5))
        layer = BatchNorm(5, dtype=np.float64)
        out = layer(Tensor(x), train=True).data
        np.testing.assert_allclose(out.mean(axis=0), 0.0, atol=1e-6)
        np.testing.assert_allclose(out.std(axis=0), 1.0, atol=1e-2)

    def test_eval_mode_uses_running_stats(self):
        x = np.random.default_rng(10).normal(size=(4, 3))
        layer = BatchNorm(3, dtype=np.float64)
        out = layer(Tensor(x), train=False).data
        np.testing.assert_allclose(out, x / np.sqrt(1.0 + 1e-3), atol=1e-10)

    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(11)
        x = rng.normal(size=(8, 4))
        layer = BatchNorm(4, dtype=np.float64)
        out = layer(Tensor(x), train=True).data
        np.testing.assert_allclose(out, batch_norm_oracle(x), atol=1e-10)

    def test_running_statistics_update(self):
        rng = np.random.default_rng(12)
        x = rng.normal(2.0, 3.0, size=(32, 2))
        layer = BatchNorm(2, dtype=np.float64)
        layer(Tensor(x), train=True)
        expected_mean = 0.99 * 0.0 + 0.01 * x.mean(axis=0)
        expected_var = 0.99 * 1.0 + 0.01 * x.var(axis=0)
        np.testing.assert_allclose(layer.running_mean, expected_mean, atol=1e-10)
        np.testing.assert_allclose(layer.running_var, expected_var, atol=1e-10)

    def test_batch_of_one_rejected(self):
        layer = BatchNorm(3)
        with pytest.raises(StatisticsError):
            layer(Tensor(np.zeros((1, 3))), train=True)

    def test_gradients_train_mode(self):
        rng = np.random.default_rng(13)

        def loss(x, g, b):
            rm = np.zeros(3)
            rv = np.ones(3)
            return tensor_sum(batch_norm(x, g, b, rm, rv, train=True) ** 2)

        check_gradient(
            loss,
            [rng.normal(size=(6, 3)), rng.normal(size=3), rng.normal(size=3)],
        )

    def test_gradients_channel_axis_3d(self):
        rng = np.random.default_rng(14)

        def loss(x, g, b):
            rm = np.zeros(2)
            rv = np.ones(2)
            return tensor_sum(batch_norm(x, g, b, rm, rv, train=True) ** 2)

        check_gradient(
            loss,
            [rng.normal(size=(4, 2, 5)), rng.normal(size=2), rng.normal(size=2)],
        )


class TestDropout:
    def test_rate_zero_identity(self):
        x = np.random.default_rng(15).normal(size=(5, 5))
        out = dropout(Tensor(x), 0.0, np.random.default_rng(0), train=True)
        np.testing.assert_array_equal(out.data, x)

    def test_eval_identity(self):
        x = np.random.default_rng(16).normal(size=(5, 5))
        out = dropout(Tensor(x), 0.9, None, train=False)
        np.testing.assert_array_equal(out.data, x)

    def test_survivor_fraction_and_expectation(self):
        rng = np.random.default_rng(17)
        x = np.ones(100_000)
        out = dropout(Tensor(x), 0.2, rng, train=True).data
        survivors = np.count_nonzero(out) / x.size
        assert abs(survivors - 0.8) < 0.01
        assert abs(out.mean() - 1.0) < 0.01

    def test_reproducible_from_seed(self):
        x = np.ones((64, 64))
        a = dropout(Tensor(x), 0.3, np.random.default_rng(123), train=True).data
        b = dropout(Tensor(x), 0.3, np.random.default_rng(123), train=True).data
        np.testing.assert_array_equal(a, b)

    def test_bad_rate_rejected(self):
        with pytest.raises(ParameterError):
            dropout(Tensor(np.ones(4)), 1.0, np.random.default_rng(0), train=True)

    def test_gradient_with_fixed_mask(self):
        rng = np.random.default_rng(18)

        def loss(x):
            return tensor_sum(dropout(x, 0.4, np.random.default_rng(7), train=True) ** 2)

        check_gradient(loss, [rng.normal(size=(6, 4))])


class TestSoftmaxCrossEntropy:
    def test_one_hot_prediction_zero_loss(self):
        logits = Tensor(np.array([[100.0, 0.0, 0.0]]))
        loss = softmax_cross_entropy(logits, np.array([0]))
        assert float(loss.data) < 1e-12

    def test_uniform_logits_log_m(self):
        logits = Tensor(np.zeros((4, 7)))
        loss = softmax_cross_entropy(logits, np.array([0, 1, 2, 3]))
        np.testing.assert_allclose(float(loss.data), np.log(7.0), atol=1e-12)

    def test_hand_computed_binary_case(self):
        # softmax([ln 3, 0]) = [0.75, 0.25]
        logits = Tensor(np.array([[np.log(3.0), 0.0]]))
        loss = softmax_cross_entropy(logits, np.array([0]))
        np.testing.assert_allclose(float(loss.data), -np.log(0.75), atol=1e-12)

    def test_softmax_rows_are_simplex(self):
        rng = np.random.default_rng(19)
        probs = softmax(rng.normal(size=(50, 9)) * 10)
        assert np.all(probs > 0) and np.all(probs < 1)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)

    def test_label_out_of_range_rejected(self):
        with pytest.raises(ParameterError):
            softmax_cross_entropy(Tensor(np.zeros((2, 3))), np.array([0, 3]))

    def test_gradient(self):
        rng = np.random.default_rng(20)
        labels = np.array([0, 2, 1, 2])
        check_gradient(
            lambda z: softmax_cross_entropy(z, labels),
            [rng.normal(size=(4, 3))],
        )

    def test_extreme_logits_stable(self):
        logits = Tensor(np.array([[1000.0, -1000.0], [-1000.0, 1000.0]]))
        loss = softmax_cross_entropy(logits, np.array([0, 1]))
        assert np.isfinite(float(loss.data))


class TestAdam:
    def test_zero_gradient_leaves_params(self):
        p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
        opt = Adam([("p", p)])
        p.grad = np.zeros(2)
        opt.step()
        np.testing.assert_array_equal(p.data, [1.0, -2.0])

    def test_first_step_magnitude_near_lr(self):
        p = Tensor(np.array([0.5]), requires_grad=True)
        opt = Adam([("p", p)], lr=1e-3)
        p.grad = np.array([0.37])
        opt.step()
        delta = 0.5 - p.data[0]
        np.testing.assert_allclose(delta, 1e-3 * 0.37 / (0.37 + 1e-8), rtol=1e-6)

    def test_two_steps_match_scalar_oracle(self):
        p = Tensor(np.array([0.8]), requires_grad=True)
        opt = Adam([("p", p)], lr=1e-3)
        for _ in range(2):
            p.grad = np.array([0.25])
            opt.step()
        np.testing.assert_allclose(p.data[0], adam_oracle(0.8, 0.25, steps=2), atol=1e-12)

    def test_non_finite_gradient_aborts(self):
        from eegbbnet.errors import TrainingDivergedError

        p = Tensor(np.ones(2), requires_grad=True)
        opt = Adam([("p", p)])
        p.grad = np.array([1.0, np.nan])
        with pytest.raises(TrainingDivergedError):
            opt.step()
