"""The three-class window classifier.

Topology: conv block (1 -> stem channels), residual block at constant width,
residual block doubling the width through a kernel-1 projection shortcut,
global average pooling over time, then two fully-connected layers with a
ReLU and dropout in between, finishing in a softmax over the three window
classes.  Every convolution is stride-1 and same-padded so the temporal
extent stays at the input length until the pooling stage.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from ..trace import standardize_rows
from .layers import (
    BatchNorm1d,
    Conv1d,
    Dense,
    Dropout,
    GlobalAvgPool,
    ReLU,
    ShapeError,
    softmax,
)


@dataclass(frozen=True)
class ModelConfig:
    input_len: int
    conv_kernel: int = 64
    channels_stem: int = 16
    channels_res1: int = 16
    channels_res2: int = 32
    fc_hidden: int = 64
    n_classes: int = 3
    dropout_p: float = 0.0

    def __post_init__(self):
        if self.input_len < 2 or self.conv_kernel < 1:
            raise ValueError("input_len must be >= 2 and conv_kernel >= 1")
        if min(self.channels_stem, self.channels_res1, self.channels_res2, self.fc_hidden) < 1:
            raise ValueError("channel and hidden widths must be positive")
        if self.n_classes != 3:
            raise ValueError("classifier is fixed to 3 classes")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError("dropout_p must be in [0, 1)")


class ConvBlock:
    """conv -> batch norm -> ReLU"""

    def __init__(self, in_ch, out_ch, kernel, rng, name, dtype=np.float64):
        self.conv = Conv1d(in_ch, out_ch, kernel, rng, name=f"{name}.conv", dtype=dtype)
        self.bn = BatchNorm1d(out_ch, name=f"{name}.bn", dtype=dtype)
        self.relu = ReLU()

    def params(self):
        return self.conv.params() + self.bn.params()

    def buffers(self):
        return self.bn.buffers()

    def forward(self, x, train=False):
        return self.relu.forward(self.bn.forward(self.conv.forward(x, train), train), train)

    def backward(self, dout):
        return self.conv.backward(self.bn.backward(self.relu.backward(dout)))


class ResidualBlock:
    """Two conv blocks plus an element-wise shortcut sum.

    When the channel count changes, the shortcut is a kernel-1 convolution
    followed by batch norm; otherwise it is the identity, so zeroed conv
    weights make the block an exact pass-through.
    """

    def __init__(self, in_ch, out_ch, kernel, rng, name, dtype=np.float64):
        self.cb1 = ConvBlock(in_ch, out_ch, kernel, rng, name=f"{name}.cb1", dtype=dtype)
        self.cb2 = ConvBlock(out_ch, out_ch, kernel, rng, name=f"{name}.cb2", dtype=dtype)
        if in_ch != out_ch:
            self.proj_conv = Conv1d(in_ch, out_ch, 1, rng, name=f"{name}.proj.conv", dtype=dtype)
            self.proj_bn = BatchNorm1d(out_ch, name=f"{name}.proj.bn", dtype=dtype)
        else:
            self.proj_conv = None
            self.proj_bn = None

    def params(self):
        out = self.cb1.params() + self.cb2.params()
        if self.proj_conv is not None:
            out += self.proj_conv.params() + self.proj_bn.params()
        return out

    def buffers(self):
        out = self.cb1.buffers() + self.cb2.buffers()
        if self.proj_bn is not None:
            out += self.proj_bn.buffers()
        return out

    def forward(self, x, train=False):
        main = self.cb2.forward(self.cb1.forward(x, train), train)
        if self.proj_conv is None:
            short = x
        else:
            short = self.proj_bn.forward(self.proj_conv.forward(x, train), train)
        return main + short

    def backward(self, dout):
        dx_main = self.cb1.backward(self.cb2.backward(dout))
        if self.proj_conv is None:
            dx_short = dout
        else:
            dx_short = self.proj_conv.backward(self.proj_bn.backward(dout))
        return dx_main + dx_short


class ConvNet1d:
    """Full classifier; construct with a config and a seeded generator."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator, dtype=np.float64):
        self.cfg = cfg
        self.dtype = np.dtype(dtype)
        self.stem = ConvBlock(1, cfg.channels_stem, cfg.conv_kernel, rng, "stem", dtype=dtype)
        self.res1 = ResidualBlock(cfg.channels_stem, cfg.channels_res1, cfg.conv_kernel, rng, "res1", dtype=dtype)
        self.res2 = ResidualBlock(cfg.channels_res1, cfg.channels_res2, cfg.conv_kernel, rng, "res2", dtype=dtype)
        self.gap = GlobalAvgPool()
        self.fc1 = Dense(cfg.channels_res2, cfg.fc_hidden, rng, "fc1", dtype=dtype)
        self.fc_relu = ReLU()
        self.dropout = Dropout(cfg.dropout_p)
        self.fc2 = Dense(cfg.fc_hidden, cfg.n_classes, rng, "fc2", dtype=dtype)

    def _blocks(self):
        return (self.stem, self.res1, self.res2)

    def named_parameters(self) -> dict[str, np.ndarray]:
        out = {}
        for block in self._blocks():
            for name, p, _ in block.params():
                out[name] = p
        for layer in (self.fc1, self.fc2):
            for name, p, _ in layer.params():
                out[name] = p
        return out

    def named_gradients(self) -> dict[str, np.ndarray]:
        out = {}
        for block in self._blocks():
            for name, _, g in block.params():
                out[name] = g
        for layer in (self.fc1, self.fc2):
            for name, _, g in layer.params():
                out[name] = g
        return out

    def named_buffers(self) -> dict[str, np.ndarray]:
        out = {}
        for block in self._blocks():
            for name, b in block.buffers():
                out[name] = b
        return out

    def _as_batch(self, x: np.ndarray) -> np.ndarray:
        """Accept (B, N) windows or (B, 1, N) batches; layers run (B, N, C)."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 3 and x.shape[1] == 1 and x.shape[2] == self.cfg.input_len:
            x = x[:, 0, :]
        if x.ndim != 2 or x.shape[1] != self.cfg.input_len:
            raise ShapeError(
                f"model input: expected (B, 1, {self.cfg.input_len}), got {x.shape}"
            )
        return np.ascontiguousarray(x[:, :, None], dtype=self.dtype)

    def forward_logits(self, x: np.ndarray, train: bool = False,
                       rng: np.random.Generator | None = None) -> np.ndarray:
        h = self._as_batch(x)
        for block in self._blocks():
            h = block.forward(h, train)
        h = self.gap.forward(h, train)
        h = self.fc_relu.forward(self.fc1.forward(h, train), train)
        h = self.dropout.forward(h, train, rng)
        return self.fc2.forward(h, train)

    def forward(self, x: np.ndarray, train: bool = False,
                rng: np.random.Generator | None = None) -> np.ndarray:
        """Class probabilities, one row per window, each summing to 1."""
        return softmax(self.forward_logits(x, train, rng).astype(np.float64))

    def loss_and_grad(self, x: np.ndarray, labels: np.ndarray,
                      rng: np.random.Generator | None = None) -> tuple[float, dict[str, np.ndarray]]:
        """Mean cross-entropy over the batch plus gradients for every
        parameter tensor (same keys as :meth:`named_parameters`)."""
        labels = np.asarray(labels)
        if labels.ndim != 1 or labels.shape[0] != np.asarray(x).shape[0]:
            raise ValueError("labels must be 1-D and match the batch size")
        if labels.size and (labels.min() < 0 or labels.max() >= self.cfg.n_classes):
            raise ValueError(f"labels must lie in [0, {self.cfg.n_classes})")
        logits = self.forward_logits(x, train=True, rng=rng).astype(np.float64)
        # stable log-softmax cross entropy
        zmax = logits.max(axis=1, keepdims=True)
        logsumexp = zmax[:, 0] + np.log(np.exp(logits - zmax).sum(axis=1))
        batch = logits.shape[0]
        loss = float(np.mean(logsumexp - logits[np.arange(batch), labels]))
        probs = softmax(logits)
        dlogits = probs
        dlogits[np.arange(batch), labels] -= 1.0
        dlogits /= batch
        self._backward(dlogits.astype(self.dtype))
        return loss, self.named_gradients()

    def _backward(self, dlogits: np.ndarray) -> None:
        d = self.fc2.backward(dlogits)
        d = self.dropout.backward(d)
        d = self.fc1.backward(self.fc_relu.backward(d))
        d = self.gap.backward(d)
        d = self.res2.backward(d)
        d = self.res1.backward(d)
        self.stem.backward(d)

    def clone(self) -> "ConvNet1d":
        """Deep copy with independent parameter and buffer arrays."""
        return copy.deepcopy(self)


def forward(model: ConvNet1d, batch: np.ndarray, train: bool = False,
            rng: np.random.Generator | None = None) -> np.ndarray:
    return model.forward(batch, train=train, rng=rng)


def loss_and_grad(model: ConvNet1d, batch: np.ndarray, labels: np.ndarray,
                  rng: np.random.Generator | None = None):
    return model.loss_and_grad(batch, labels, rng=rng)


def predict_batch(model: ConvNet1d, windows: np.ndarray,
                  batch_size: int = 128) -> tuple[np.ndarray, np.ndarray]:
    """Classify raw windows in eval mode.

    Windows are z-scored per row exactly as during training.  Ties in the
    probability vector resolve to the lowest class index.
    """
    x = standardize_rows(np.atleast_2d(np.asarray(windows, dtype=np.float64)))
    probs = np.empty((x.shape[0], model.cfg.n_classes))
    for lo in range(0, x.shape[0], batch_size):
        probs[lo : lo + batch_size] = model.forward(x[lo : lo + batch_size], train=False)
    return probs.argmax(axis=1), probs
