"""Layer-level checks: finite-difference gradients and structural invariants."""

import numpy as np
import pytest

from houndkit.nn.layers import (
    BatchNorm1d,
    Conv1d,
    Dense,
    Dropout,
    GlobalAvgPool,
    ReLU,
    ShapeError,
    softmax,
)
from houndkit.nn.model import ConvNet1d, ModelConfig, ResidualBlock

from _utils import fd_gradient_check, relative_error

H = 1e-3
RTOL = 1e-3


def layer_loss(layer, x, weights=None, train=True):
    """Scalar probe loss: weighted sum of the layer output."""
    out = layer.forward(x, train=train)
    if weights is None:
        weights = np.cos(np.arange(out.size)).reshape(out.shape)
    return float((out * weights).sum()), weights


class TestConvGradients:
    def test_param_and_input_gradients(self):
        rng = np.random.default_rng(0)
        conv = Conv1d(3, 4, 5, rng)
        x = rng.standard_normal((2, 12, 3))
        weights = np.cos(np.arange(2 * 12 * 4)).reshape(2, 12, 4)

        out = conv.forward(x, train=True)
        dx = conv.backward(weights)
        for param, grad in ((conv.weight, conv.dweight), (conv.bias, conv.dbias)):
            fd_gradient_check(lambda: layer_loss(conv, x, weights)[0], param, grad, h=H, rtol=RTOL)
        # input gradient
        flat = x.reshape(-1)
        for idx in range(0, flat.size, 7):
            keep = flat[idx]
            flat[idx] = keep + H
            f_plus = layer_loss(conv, x, weights)[0]
            flat[idx] = keep - H
            f_minus = layer_loss(conv, x, weights)[0]
            flat[idx] = keep
            numeric = (f_plus - f_minus) / (2 * H)
            assert relative_error(dx.reshape(-1)[idx], numeric) < RTOL

    def test_even_kernel_gradients(self):
        rng = np.random.default_rng(1)
        conv = Conv1d(2, 3, 4, rng)
        x = rng.standard_normal((2, 9, 2))
        weights = np.sin(np.arange(2 * 9 * 3)).reshape(2, 9, 3)
        conv.forward(x, train=True)
        conv.backward(weights)
        fd_gradient_check(lambda: layer_loss(conv, x, weights)[0], conv.weight, conv.dweight,
                          h=H, rtol=RTOL)

    def test_kernel_one_gradients(self):
        rng = np.random.default_rng(2)
        conv = Conv1d(3, 5, 1, rng)
        x = rng.standard_normal((2, 7, 3))
        weights = np.cos(np.arange(2 * 7 * 5)).reshape(2, 7, 5)
        conv.forward(x, train=True)
        conv.backward(weights)
        fd_gradient_check(lambda: layer_loss(conv, x, weights)[0], conv.weight, conv.dweight,
                          h=H, rtol=RTOL)


class TestConvShape:
    def test_same_padding_lengths(self):
        rng = np.random.default_rng(3)
        for kernel in (1, 2, 3, 4, 5, 16, 64):
            conv = Conv1d(1, 1, kernel, rng)
            out = conv.forward(np.ones((1, 100, 1)))
            assert out.shape == (1, 100, 1)

    def test_matches_direct_correlation(self):
        rng = np.random.default_rng(4)
        conv = Conv1d(1, 1, 4, rng)
        x = rng.standard_normal(30)
        out = conv.forward(x[None, :, None])[0, :, 0]
        # direct same-padded correlation; even kernel pads one extra right
        xp = np.pad(x, (1, 2))
        expected = np.array([
            (xp[i : i + 4] * conv.weight[0, 0]).sum() + conv.bias[0] for i in range(30)
        ])
        assert np.allclose(out, expected, atol=1e-12)

    def test_shape_error_names_layer(self):
        conv = Conv1d(3, 4, 5, np.random.default_rng(0), name="res1.cb1.conv")
        with pytest.raises(ShapeError, match="res1.cb1.conv"):
            conv.forward(np.ones((2, 10, 2)))


class TestBatchNormGradients:
    def test_train_mode_gradients(self):
        rng = np.random.default_rng(5)
        bn = BatchNorm1d(3)
        x = rng.standard_normal((4, 6, 3)) * 2.0 + 1.0
        weights = np.cos(np.arange(4 * 6 * 3)).reshape(4, 6, 3)
        bn.forward(x, train=True)
        dx = bn.backward(weights)
        for param, grad in ((bn.gamma, bn.dgamma), (bn.beta, bn.dbeta)):
            fd_gradient_check(lambda: layer_loss(bn, x, weights)[0], param, grad, h=H, rtol=RTOL)
        flat = x.reshape(-1)
        for idx in range(0, flat.size, 5):
            keep = flat[idx]
            flat[idx] = keep + H
            f_plus = layer_loss(bn, x, weights)[0]
            flat[idx] = keep - H
            f_minus = layer_loss(bn, x, weights)[0]
            flat[idx] = keep
            numeric = (f_plus - f_minus) / (2 * H)
            assert relative_error(dx.reshape(-1)[idx], numeric) < RTOL


class TestBatchNormEval:
    def test_eval_is_batch_independent(self):
        rng = np.random.default_rng(6)
        bn = BatchNorm1d(2)
        bn.forward(rng.standard_normal((8, 5, 2)), train=True)  # move running stats
        w = rng.standard_normal((1, 5, 2))
        alone = bn.forward(w, train=False)
        stacked = bn.forward(np.concatenate([w, rng.standard_normal((3, 5, 2))]), train=False)
        assert np.allclose(alone[0], stacked[0], atol=1e-6)

    def test_running_stats_updated_only_in_train(self):
        bn = BatchNorm1d(1)
        before = bn.running_mean.copy()
        bn.forward(np.ones((2, 4, 1)) * 3.0, train=False)
        assert np.array_equal(bn.running_mean, before)
        bn.forward(np.ones((2, 4, 1)) * 3.0, train=True)
        assert not np.array_equal(bn.running_mean, before)


class TestDenseGradients:
    def test_gradients(self):
        rng = np.random.default_rng(7)
        fc = Dense(6, 4, rng)
        x = rng.standard_normal((3, 6))
        weights = np.cos(np.arange(12)).reshape(3, 4)
        fc.forward(x, train=True)
        fc.backward(weights)
        for param, grad in ((fc.weight, fc.dweight), (fc.bias, fc.dbias)):
            fd_gradient_check(lambda: layer_loss(fc, x, weights)[0], param, grad, h=H, rtol=RTOL)


class TestDropout:
    def test_eval_mode_identity(self):
        d = Dropout(0.5)
        x = np.ones((3, 4))
        assert np.array_equal(d.forward(x, train=False), x)

    def test_zero_p_consumes_no_randomness(self):
        d = Dropout(0.0)
        rng = np.random.default_rng(0)
        d.forward(np.ones((2, 2)), train=True, rng=rng)
        assert rng.random() == np.random.default_rng(0).random()

    def test_inverted_scaling(self):
        d = Dropout(0.25)
        rng = np.random.default_rng(1)
        out = d.forward(np.ones((200, 50)), train=True, rng=rng)
        kept = out[out > 0]
        assert np.allclose(kept, 1.0 / 0.75)
        assert abs((out > 0).mean() - 0.75) < 0.02

    def test_requires_rng_when_active(self):
        with pytest.raises(ValueError):
            Dropout(0.5).forward(np.ones((2, 2)), train=True)


class TestGapAndRelu:
    def test_gap_forward_backward(self):
        gap = GlobalAvgPool()
        x = np.arange(24, dtype=np.float64).reshape(2, 4, 3)
        out = gap.forward(x, train=True)
        assert np.allclose(out, x.mean(axis=1))
        dx = gap.backward(np.ones((2, 3)))
        assert dx.shape == x.shape
        assert np.allclose(dx, 0.25)

    def test_relu_gradient_mask(self):
        relu = ReLU()
        x = np.array([[-1.0, 2.0, 0.5, -0.1]])
        relu.forward(x, train=True)
        dx = relu.backward(np.ones_like(x))
        assert dx.tolist() == [[0.0, 1.0, 1.0, 0.0]]


class TestResidualBlock:
    def test_identity_with_zeroed_convs(self):
        rng = np.random.default_rng(8)
        block = ResidualBlock(4, 4, 3, rng, "rb")
        for _, p, _ in block.cb1.params() + block.cb2.params():
            p[...] = 0.0 if p.ndim > 0 else p
        block.cb1.conv.weight[...] = 0.0
        block.cb1.conv.bias[...] = 0.0
        block.cb2.conv.weight[...] = 0.0
        block.cb2.conv.bias[...] = 0.0
        # batch norm identity transform
        for bn in (block.cb1.bn, block.cb2.bn):
            bn.gamma[...] = 1.0
            bn.beta[...] = 0.0
            bn.running_mean[...] = 0.0
            bn.running_var[...] = 1.0
        x = rng.standard_normal((2, 10, 4))
        out = block.forward(x, train=False)
        assert np.array_equal(out, x)

    def test_projection_block_changes_channels(self):
        rng = np.random.default_rng(9)
        block = ResidualBlock(4, 8, 3, rng, "rb2")
        out = block.forward(rng.standard_normal((2, 10, 4)))
        assert out.shape == (2, 10, 8)
        assert block.proj_conv is not None and block.proj_conv.kernel == 1


class TestSoftmax:
    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(10)
        probs = softmax(rng.standard_normal((1000, 3)) * 5)
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-6)
        assert np.all(probs > 0) and np.all(probs < 1)

    def test_extreme_logits_stay_normalized(self):
        probs = softmax(np.array([[1e4, 0.0, -1e4], [-1e4, -1e4, -1e4]]))
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-6)
        assert not np.any(np.isnan(probs))
