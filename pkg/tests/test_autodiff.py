"""Unit tests for the tape, the ops, their gradients, and Adam."""

import numpy as np
import pytest

from oracles import conv_reference, numeric_grad, rel_err
from tcnad.autodiff import (
    Tape,
    Tensor,
    add,
    backward,
    causal_dilated_conv1d,
    concat_cols,
    contract_last,
    dropout,
    leaky_relu,
    linear,
    matmul,
    pairwise_sum,
    reshape,
    rmse_loss,
    sigmoid,
    slice_cols,
    slice_vec,
    softmax_rows,
    take_row,
    transpose,
)
from tcnad.optim import AdamState, adam_step


class TestTensor:
    def test_coerces_to_float64(self):
        t = Tensor([[1, 2], [3, 4]])
        assert t.values.dtype == np.float64
        assert not t.requires_grad

    def test_grad_accumulates(self):
        t = Tensor(np.zeros(3), requires_grad=True)
        t.accumulate_grad(np.ones(3))
        t.accumulate_grad(np.ones(3))
        np.testing.assert_array_equal(t.grad, 2 * np.ones(3))
        t.zero_grad()
        assert t.grad is None


class TestForwardValues:
    def test_matmul_hand_case(self):
        a = Tensor([[1.0, 2.0], [3.0, 4.0]])
        b = Tensor([[5.0, 6.0], [7.0, 8.0]])
        np.testing.assert_array_equal(matmul(a, b).values, [[19, 22], [43, 50]])

    def test_matmul_shape_error(self):
        with pytest.raises(ValueError):
            matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 3))))

    def test_add_bias_broadcast(self):
        out = add(Tensor(np.zeros((3, 2))), Tensor([1.0, 2.0]))
        np.testing.assert_array_equal(out.values, [[1, 2]] * 3)

    def test_add_shape_error(self):
        with pytest.raises(ValueError):
            add(Tensor(np.zeros((2, 2))), Tensor(np.zeros((3, 2))))

    def test_linear_identity(self):
        x = Tensor([[1.0, -2.0]])
        out = linear(x, Tensor(np.eye(2)), Tensor(np.zeros(2)))
        np.testing.assert_array_equal(out.values, x.values)

    def test_leaky_relu_slope(self):
        out = leaky_relu(Tensor([-2.0, 0.0, 3.0]), slope=0.2)
        np.testing.assert_allclose(out.values, [-0.4, 0.0, 3.0])

    def test_sigmoid_midpoint_and_extremes(self):
        out = sigmoid(Tensor([0.0, 50.0, -50.0, -1000.0]))
        np.testing.assert_allclose(out.values[0], 0.5)
        assert out.values[1] > 1 - 1e-12
        assert out.values[2] < 1e-12
        assert np.isfinite(out.values).all()  # no overflow on large negatives

    def test_softmax_rows_stochastic(self):
        rng = np.random.default_rng(42)
        x = Tensor(rng.standard_normal((5, 7)) * 10)
        y = softmax_rows(x).values
        assert (y > 0).all()
        np.testing.assert_allclose(y.sum(axis=1), np.ones(5), atol=1e-12)

    def test_softmax_shift_invariance(self):
        # the shift rounds the inputs themselves, so equality holds to ~1 ulp
        rng = np.random.default_rng(7)
        x = rng.standard_normal((3, 4))
        a = softmax_rows(Tensor(x)).values
        b = softmax_rows(Tensor(x + 123.456)).values
        np.testing.assert_allclose(a, b, rtol=1e-12)

    def test_slice_and_concat_roundtrip(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((4, 6))
        parts = [slice_cols(Tensor(x), 0, 2), slice_cols(Tensor(x), 2, 6)]
        np.testing.assert_array_equal(concat_cols(parts).values, x)

    def test_slice_vec(self):
        v = slice_vec(Tensor([1.0, 2.0, 3.0, 4.0]), 1, 3)
        np.testing.assert_array_equal(v.values, [2.0, 3.0])

    def test_take_row_keeps_2d(self):
        out = take_row(Tensor([[1.0, 2.0], [3.0, 4.0]]), 1)
        assert out.values.shape == (1, 2)
        np.testing.assert_array_equal(out.values, [[3.0, 4.0]])

    def test_transpose_reshape(self):
        x = Tensor([[1.0, 2.0, 3.0]])
        assert transpose(x).values.shape == (3, 1)
        assert reshape(x, (3,)).values.shape == (3,)

    def test_pairwise_sum_hand_case(self):
        a = Tensor([[1.0], [2.0]])
        b = Tensor([[10.0], [20.0]])
        out = pairwise_sum(a, b)
        np.testing.assert_array_equal(out.values[:, :, 0], [[11, 21], [12, 22]])

    def test_contract_last(self):
        t = Tensor(np.arange(12.0).reshape(2, 3, 2))
        v = Tensor([1.0, -1.0])
        np.testing.assert_array_equal(contract_last(t, v).values, t.values @ v.values)


class TestConvForward:
    def test_hand_case_kernel2(self):
        # last output = 1*3 + 2*5 = 13 for f = [1, 2] over the last two inputs
        x = Tensor(np.array([[1.0], [2.0], [3.0], [5.0]]))
        f = Tensor(np.array([1.0, 2.0]).reshape(2, 1, 1))
        out = causal_dilated_conv1d(x, f, dilation=1)
        # first step only sees x[0] through the second tap (left zero padding)
        np.testing.assert_allclose(out.values[:, 0], [2.0, 5.0, 8.0, 13.0])

    def test_delta_kernel_is_identity(self):
        rng = np.random.default_rng(42)
        x = rng.standard_normal((9, 3))
        f = np.zeros((4, 3, 3))
        f[-1] = np.eye(3)  # only the current-time tap, identity across channels
        out = causal_dilated_conv1d(Tensor(x), Tensor(f), dilation=2)
        np.testing.assert_array_equal(out.values, x)

    def test_causality(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((12, 2))
        f = rng.standard_normal((3, 2, 4))
        base = causal_dilated_conv1d(Tensor(x), Tensor(f), dilation=2).values
        x2 = x.copy()
        x2[7] += 100.0
        bumped = causal_dilated_conv1d(Tensor(x2), Tensor(f), dilation=2).values
        np.testing.assert_array_equal(bumped[:7], base[:7])
        assert not np.allclose(bumped[7:], base[7:])

    def test_matches_loop_reference(self):
        rng = np.random.default_rng(42)
        for _ in range(25):
            w = int(rng.integers(1, 13))
            c_in = int(rng.integers(1, 4))
            c_out = int(rng.integers(1, 4))
            k = int(rng.integers(1, 5))
            d = int(rng.integers(1, 5))
            x = rng.standard_normal((w, c_in))
            f = rng.standard_normal((k, c_in, c_out))
            fast = causal_dilated_conv1d(Tensor(x), Tensor(f), d).values
            np.testing.assert_allclose(fast, conv_reference(x, f, d), atol=1e-12)

    def test_rejects_bad_args(self):
        x, f = Tensor(np.zeros((5, 2))), Tensor(np.zeros((2, 2, 3)))
        with pytest.raises(ValueError):
            causal_dilated_conv1d(x, f, dilation=0)
        with pytest.raises(ValueError):
            causal_dilated_conv1d(Tensor(np.zeros((5, 4))), f, dilation=1)


class TestRmse:
    def test_hand_values(self):
        loss = rmse_loss(Tensor([3.0, 0.0]), Tensor([0.0, 4.0]))
        np.testing.assert_allclose(float(loss.values), np.sqrt(12.5))
        zero = rmse_loss(Tensor([1.0, 2.0]), Tensor([1.0, 2.0]))
        assert float(zero.values) == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            rmse_loss(Tensor([1.0]), Tensor([1.0, 2.0]))

    def test_zero_residual_gradient_is_zero(self):
        p = Tensor([1.0, 2.0], requires_grad=True)
        with Tape():
            loss = rmse_loss(p, Tensor([1.0, 2.0]))
            backward(loss)
        np.testing.assert_array_equal(p.grad, [0.0, 0.0])


class TestDropout:
    def test_identity_when_not_training(self):
        x = Tensor(np.ones((4, 4)))
        np.testing.assert_array_equal(dropout(x, 0.5, training=False).values, x.values)

    def test_identity_at_rate_zero(self):
        x = Tensor(np.ones((4, 4)))
        out = dropout(x, 0.0, training=True, rng=np.random.default_rng(0))
        np.testing.assert_array_equal(out.values, x.values)

    def test_mask_fraction_and_scaling(self):
        rng = np.random.default_rng(42)
        x = Tensor(np.ones(200_000))
        out = dropout(x, 0.3, training=True, rng=rng).values
        kept = out != 0
        # binomial: expect 0.7 +- ~4 sigma
        assert abs(kept.mean() - 0.7) < 4 * np.sqrt(0.3 * 0.7 / x.size)
        np.testing.assert_allclose(out[kept], 1.0 / 0.7)

    def test_requires_rng_when_training(self):
        with pytest.raises(ValueError):
            dropout(Tensor(np.ones(3)), 0.5, training=True)

    def test_rejects_rate_one(self):
        with pytest.raises(ValueError):
            dropout(Tensor(np.ones(3)), 1.0, training=False)


class TestBackward:
    def test_requires_scalar_and_tape(self):
        t = Tensor(np.ones(2), requires_grad=True)
        with Tape():
            with pytest.raises(ValueError):
                backward(add(t, t))
        with pytest.raises(RuntimeError):
            backward(Tensor(np.float64(1.0)))

    def test_no_recording_without_tape(self):
        a = Tensor(np.ones((2, 2)), requires_grad=True)
        out = matmul(a, a)
        assert not out.requires_grad

    def test_square_via_shared_operand(self):
        # both matmul slots see the same tensor, so grads d(x.x)/dx = 2x add up
        x = Tensor([[3.0]], requires_grad=True)
        with Tape():
            backward(reshape(matmul(x, x), ()))
        np.testing.assert_allclose(x.grad, [[6.0]])

    def test_fanout_accumulation(self):
        x = Tensor([[1.0, 2.0]], requires_grad=True)
        with Tape():
            y = add(x, x)
            backward(rmse_loss(y, Tensor([[0.0, 0.0]])))
        # d rmse(2x)/dx via both add slots; compare against finite differences
        def f():
            return float(np.sqrt(np.mean((2 * x.values) ** 2)))

        num = numeric_grad(f, x.values, range(2))
        for idx, val in num.items():
            assert rel_err(x.grad.ravel()[idx], val) < 1e-6

    def test_softmax_sum_has_null_gradient(self):
        x = Tensor(np.random.default_rng(42).standard_normal((1, 5)), requires_grad=True)
        ones = Tensor(np.ones((5, 1)))
        with Tape():
            backward(reshape(matmul(softmax_rows(x), ones), ()))
        np.testing.assert_allclose(x.grad, np.zeros((1, 5)), atol=1e-12)

    @pytest.mark.parametrize("seed", range(6))
    def test_composite_chain_matches_fd(self, seed):
        rng = np.random.default_rng(seed)
        w1 = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
        b1 = Tensor(rng.standard_normal(4), requires_grad=True)
        w2 = Tensor(rng.standard_normal((4, 2)), requires_grad=True)
        b2 = Tensor(rng.standard_normal(2), requires_grad=True)
        x = rng.standard_normal((5, 3))
        y = rng.standard_normal((5, 2))

        def run():
            h = leaky_relu(linear(Tensor(x), w1, b1), 0.2)
            return rmse_loss(sigmoid(linear(h, w2, b2)), Tensor(y))

        with Tape():
            backward(run())
        for p in (w1, b1, w2, b2):
            num = numeric_grad(lambda: float(run().values), p.values, range(p.values.size))
            for idx, val in num.items():
                assert rel_err(p.grad.ravel()[idx], val) < 1e-5

    @pytest.mark.parametrize("seed", range(4))
    def test_conv_backward_matches_fd(self, seed):
        rng = np.random.default_rng(100 + seed)
        w, c_in, c_out = 7, 2, 3
        k = int(rng.integers(1, 4))
        d = int(rng.integers(1, 4))
        x = Tensor(rng.standard_normal((w, c_in)), requires_grad=True)
        f = Tensor(rng.standard_normal((k, c_in, c_out)), requires_grad=True)
        y = rng.standard_normal((w, c_out))

        def run():
            return rmse_loss(causal_dilated_conv1d(x, f, d), Tensor(y))

        with Tape():
            backward(run())
        for p in (x, f):
            num = numeric_grad(lambda: float(run().values), p.values, range(p.values.size))
            for idx, val in num.items():
                assert rel_err(p.grad.ravel()[idx], val) < 1e-5

    def test_attention_style_ops_match_fd(self):
        rng = np.random.default_rng(42)
        a = Tensor(rng.standard_normal((3, 2)), requires_grad=True)
        b = Tensor(rng.standard_normal((4, 2)), requires_grad=True)
        v = Tensor(rng.standard_normal(2), requires_grad=True)
        target = rng.standard_normal((3, 4))

        def run():
            scores = contract_last(leaky_relu(pairwise_sum(a, b), 0.2), v)
            return rmse_loss(softmax_rows(scores), Tensor(target))

        with Tape():
            backward(run())
        for p in (a, b, v):
            num = numeric_grad(lambda: float(run().values), p.values, range(p.values.size))
            for idx, val in num.items():
                assert rel_err(p.grad.ravel()[idx], val) < 1e-5

    def test_dropout_backward_uses_same_mask(self):
        x = Tensor(np.ones((50, 4)), requires_grad=True)
        with Tape():
            out = dropout(x, 0.4, training=True, rng=np.random.default_rng(3))
            backward(rmse_loss(out, Tensor(np.zeros((50, 4)))))
        # gradient must vanish exactly where the mask dropped the input
        dropped = out.values == 0
        assert dropped.any()
        np.testing.assert_array_equal(x.grad[dropped], 0.0)
        assert (x.grad[~dropped] != 0).all()


class TestAdam:
    def test_single_step_magnitude(self):
        p = Tensor(np.array([1.0]), requires_grad=True)
        p.grad = np.array([1.0])
        state = AdamState(learning_rate=0.1)
        adam_step([p], state)
        # bias correction makes the very first step ~= lr regardless of gradient scale
        np.testing.assert_allclose(p.values, [0.9], atol=1e-8)

    def test_skips_missing_grads(self):
        p = Tensor(np.array([1.0]), requires_grad=True)
        state = AdamState()
        adam_step([p], state)
        np.testing.assert_array_equal(p.values, [1.0])

    def test_identical_params_stay_identical(self):
        rng = np.random.default_rng(42)
        vals = rng.standard_normal(5)
        a, b = Tensor(vals.copy(), requires_grad=True), Tensor(vals.copy(), requires_grad=True)
        state = AdamState(learning_rate=0.01)
        for step in range(20):
            g = rng.standard_normal(5)
            a.grad, b.grad = g.copy(), g.copy()
            adam_step([a, b], state)
        np.testing.assert_array_equal(a.values, b.values)

    def test_param_count_mismatch(self):
        p = Tensor(np.zeros(2), requires_grad=True)
        q = Tensor(np.zeros(2), requires_grad=True)
        state = AdamState()
        adam_step([p], state)
        with pytest.raises(ValueError):
            adam_step([p, q], state)


def test_repeated_run_is_bit_identical():
    def run():
        rng = np.random.default_rng(42)
        w = Tensor(rng.standard_normal((4, 4)), requires_grad=True)
        x = Tensor(rng.standard_normal((6, 4)))
        y = Tensor(rng.standard_normal((6, 4)))
        with Tape():
            out = sigmoid(matmul(dropout(x, 0.2, True, np.random.default_rng(9)), w))
            backward(rmse_loss(out, y))
        return w.values.copy(), w.grad.copy()

    v1, g1 = run()
    v2, g2 = run()
    np.testing.assert_array_equal(v1, v2)
    np.testing.assert_array_equal(g1, g2)
