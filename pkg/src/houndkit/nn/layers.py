"""Hand-rolled 1D network layers with explicit forward/backward passes.

Activations use the channels-last (batch, time, channels) layout.  The
convolution runs in the frequency domain (rfft over the padded time axis,
one batched complex matmul per frequency bin, irfft back), which beats any
im2col variant for these kernel sizes; the weight gradient uses batched
matmuls over shifted views instead.  Each layer caches what its backward
pass needs when called with ``train=True``; eval-mode forwards cache
nothing.  Parameters are plain numpy arrays (float64 or float32) that the
optimizer updates in place.
"""

from __future__ import annotations

import numpy as np
from scipy.fft import irfft, next_fast_len, rfft


class ShapeError(ValueError):
    """Input tensor does not match the layer's expected shape."""


def fan_in_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Conv1d:
    """Same-padded 1D convolution, stride 1.

    Zero padding keeps the time extent at N; for even kernels the extra
    pad sample goes on the right.  The weight keeps the conventional
    (out_ch, in_ch, kernel) shape.  Kernel-1 convolutions (the residual
    projection) skip the FFT and run as a single matmul.
    """

    def __init__(self, in_ch: int, out_ch: int, kernel: int, rng: np.random.Generator,
                 name: str = "conv", dtype=np.float64):
        if kernel < 1:
            raise ValueError("kernel must be >= 1")
        self.name = name
        self.in_ch = in_ch
        self.out_ch = out_ch
        self.kernel = kernel
        self.pad_left = (kernel - 1) // 2
        self.pad_right = kernel - 1 - self.pad_left
        self.weight = fan_in_uniform(rng, (out_ch, in_ch, kernel), in_ch * kernel).astype(dtype)
        self.bias = np.zeros(out_ch, dtype=dtype)
        self.dweight = np.zeros_like(self.weight)
        self.dbias = np.zeros_like(self.bias)
        self._xp = None
        self._shape = None

    def params(self):
        return [(f"{self.name}.weight", self.weight, self.dweight),
                (f"{self.name}.bias", self.bias, self.dbias)]

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if x.ndim != 3 or x.shape[2] != self.in_ch:
            raise ShapeError(f"{self.name}: expected (B, N, {self.in_ch}), got {x.shape}")
        B, N, _ = x.shape
        if self.kernel == 1:
            out = x @ self.weight[:, :, 0].T + self.bias[None, None, :]
            if train:
                self._xp = x
                self._shape = (B, N, N)
            return out
        xp = np.pad(x, ((0, 0), (self.pad_left, self.pad_right), (0, 0)))
        np_len = N + self.kernel - 1
        nfft = next_fast_len(np_len + self.kernel - 1)
        xf = rfft(xp, nfft, axis=1)                         # (B, F, C)
        wf = rfft(self.weight[:, :, ::-1], nfft, axis=2)    # (O, C, F)
        yf = xf.transpose(1, 0, 2) @ wf.transpose(2, 1, 0)  # (F, B, O)
        y = irfft(yf, nfft, axis=0)
        out = np.ascontiguousarray(y[self.kernel - 1 : self.kernel - 1 + N].transpose(1, 0, 2))
        out += self.bias[None, None, :]
        if train:
            self._xp = xp
            self._shape = (B, N, np_len)
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        B, N, np_len = self._shape
        self.dbias = dout.sum(axis=(0, 1))
        if self.kernel == 1:
            self.dweight = np.matmul(dout.transpose(0, 2, 1), self._xp).sum(axis=0)[:, :, None]
            dx = dout @ self.weight[:, :, 0]
            self._xp = None
            return dx
        xp = self._xp
        # weight grad: correlate the padded input against the output grad
        dweight = np.empty_like(self.weight)
        for k in range(self.kernel):
            dweight[:, :, k] = np.matmul(
                dout.transpose(0, 2, 1), xp[:, k : k + N, :]
            ).sum(axis=0)
        self.dweight = dweight
        # input grad: full convolution of the output grad with the kernel
        nfft = next_fast_len(np_len + self.kernel - 1)
        df = rfft(dout, nfft, axis=1)                       # (B, F, O)
        wf = rfft(self.weight, nfft, axis=2)                # (O, C, F)
        gf = df.transpose(1, 0, 2) @ wf.transpose(2, 0, 1)  # (F, B, C)
        g = irfft(gf, nfft, axis=0)
        dxp = g[:np_len].transpose(1, 0, 2)
        self._xp = None
        return np.ascontiguousarray(dxp[:, self.pad_left : self.pad_left + N, :])


class BatchNorm1d:
    """Per-channel batch normalization over (batch, time).

    Training normalizes with biased batch statistics and folds them into the
    running estimates with momentum 0.1; eval mode uses the running
    statistics only, so per-example outputs are batch-independent.
    """

    EPS = 1e-5
    MOMENTUM = 0.1

    def __init__(self, channels: int, name: str = "bn", dtype=np.float64):
        self.name = name
        self.channels = channels
        self.gamma = np.ones(channels, dtype=dtype)
        self.beta = np.zeros(channels, dtype=dtype)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.dgamma = np.zeros_like(self.gamma)
        self.dbeta = np.zeros_like(self.beta)
        self._xhat = None
        self._inv_std = None

    def params(self):
        return [(f"{self.name}.gamma", self.gamma, self.dgamma),
                (f"{self.name}.beta", self.beta, self.dbeta)]

    def buffers(self):
        return [(f"{self.name}.running_mean", self.running_mean),
                (f"{self.name}.running_var", self.running_var)]

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if x.ndim != 3 or x.shape[2] != self.channels:
            raise ShapeError(f"{self.name}: expected (B, N, {self.channels}), got {x.shape}")
        if train:
            dtype = self.gamma.dtype
            mean = x.mean(axis=(0, 1), dtype=np.float64).astype(dtype)
            var = x.var(axis=(0, 1), dtype=np.float64).astype(dtype)
            self.running_mean = ((1 - self.MOMENTUM) * self.running_mean + self.MOMENTUM * mean).astype(dtype)
            self.running_var = ((1 - self.MOMENTUM) * self.running_var + self.MOMENTUM * var).astype(dtype)
        else:
            mean = self.running_mean
            var = self.running_var
        inv_std = 1.0 / np.sqrt(var + self.EPS)
        xhat = (x - mean[None, None, :]) * inv_std[None, None, :]
        if train:
            self._xhat = xhat
            self._inv_std = inv_std
        return self.gamma[None, None, :] * xhat + self.beta[None, None, :]

    def backward(self, dout: np.ndarray) -> np.ndarray:
        xhat, inv_std = self._xhat, self._inv_std
        m = dout.shape[0] * dout.shape[1]
        self.dgamma = (dout * xhat).sum(axis=(0, 1))
        self.dbeta = dout.sum(axis=(0, 1))
        dxhat = dout * self.gamma[None, None, :]
        term = (
            m * dxhat
            - dxhat.sum(axis=(0, 1), keepdims=True)
            - xhat * (dxhat * xhat).sum(axis=(0, 1), keepdims=True)
        )
        self._xhat = None
        self._inv_std = None
        return (inv_std[None, None, :] / m) * term


class ReLU:
    def __init__(self):
        self._mask = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        out = np.maximum(x, 0.0)
        if train:
            self._mask = x > 0
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        dx = dout * self._mask
        self._mask = None
        return dx


class Dropout:
    """Inverted dropout between the fully-connected layers.

    Draws nothing from the generator when ``p`` is 0 or in eval mode, so a
    zero-dropout model consumes an identical random stream.
    """

    def __init__(self, p: float):
        if not 0.0 <= p < 1.0:
            raise ValueError("dropout p must be in [0, 1)")
        self.p = p
        self._mask = None

    def forward(self, x: np.ndarray, train: bool = False,
                rng: np.random.Generator | None = None) -> np.ndarray:
        if not train or self.p == 0.0:
            return x
        if rng is None:
            raise ValueError("training forward with dropout requires an rng")
        mask = ((rng.random(x.shape) >= self.p) / (1.0 - self.p)).astype(x.dtype)
        self._mask = mask
        return x * mask

    def backward(self, dout: np.ndarray) -> np.ndarray:
        if self._mask is None:
            return dout
        dx = dout * self._mask
        self._mask = None
        return dx


class GlobalAvgPool:
    """(B, N, C) -> (B, C) mean over the temporal dimension."""

    def __init__(self):
        self._n = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        self._n = x.shape[1]
        return x.mean(axis=1)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        n = self._n
        return np.repeat(dout[:, None, :] / n, n, axis=1)


class Dense:
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator,
                 name: str = "fc", dtype=np.float64):
        self.name = name
        self.in_features = in_features
        self.out_features = out_features
        self.weight = fan_in_uniform(rng, (in_features, out_features), in_features).astype(dtype)
        self.bias = np.zeros(out_features, dtype=dtype)
        self.dweight = np.zeros_like(self.weight)
        self.dbias = np.zeros_like(self.bias)
        self._x = None

    def params(self):
        return [(f"{self.name}.weight", self.weight, self.dweight),
                (f"{self.name}.bias", self.bias, self.dbias)]

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeError(f"{self.name}: expected (B, {self.in_features}), got {x.shape}")
        if train:
            self._x = x
        return x @ self.weight + self.bias

    def backward(self, dout: np.ndarray) -> np.ndarray:
        self.dweight = self._x.T @ dout
        self.dbias = dout.sum(axis=0)
        dx = dout @ self.weight.T
        self._x = None
        return dx


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)
