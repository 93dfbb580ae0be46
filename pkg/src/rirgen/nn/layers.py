"""Neural network layers with hand-written forward and backward passes.

Everything runs on plain numpy so gradients are explicit and checkable
against finite differences. Convolutions share two primitives: a strided
sliding-window gather (regular convolution) and a strided slice-add
scatter (transposed convolution / data gradients). Layers cache what the
backward pass needs from the most recent training-mode forward call, so a
layer instance serves one forward/backward pair at a time.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError


def _windows(xp: np.ndarray, l_out: int, kernel: int, stride: int) -> np.ndarray:
    """View of padded (B, C, Lp) as (B, C, l_out, kernel) windows at ``stride``."""
    b, c, _ = xp.shape
    sb, sc, sl = xp.strides
    return np.lib.stride_tricks.as_strided(
        xp, shape=(b, c, l_out, kernel), strides=(sb, sc, sl * stride, sl), writeable=False
    )


def gather_conv(x: np.ndarray, wm: np.ndarray, stride: int, padding: int) -> np.ndarray:
    """y[b, n, j] = sum_{m,k} x_pad[b, m, j*stride + k] * wm[m, n, k]."""
    b, cm, l = x.shape
    _, cn, kernel = wm.shape
    l_out = (l + 2 * padding - kernel) // stride + 1
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding)))
    win = _windows(xp, l_out, kernel, stride)
    cols = win.transpose(0, 2, 1, 3).reshape(b * l_out, cm * kernel)
    wmat = wm.transpose(0, 2, 1).reshape(cm * kernel, cn)
    return (cols @ wmat).reshape(b, l_out, cn).transpose(0, 2, 1)


def scatter_conv(
    a: np.ndarray, wm: np.ndarray, stride: int, padding: int, l_out: int
) -> np.ndarray:
    """y[b, n, i*stride + k - padding] += a[b, m, i] * wm[m, n, k].

    ``wm`` is tap-major: (m, kernel, n). One GEMM with tap-major columns,
    then one contiguous slice add per kernel tap into per-phase planes
    (output positions with equal index modulo stride), interleaved at the
    end. Keeping every read and write contiguous is what makes generation
    fast at small batch sizes.
    """
    b, cm, l = a.shape
    _, kernel, cn = wm.shape
    dtype = np.result_type(a, wm)
    w2 = np.ascontiguousarray(wm).reshape(cm, kernel * cn)
    g = (a.transpose(0, 2, 1).reshape(b * l, cm) @ w2).reshape(b, l, kernel, cn)

    l_plane = -(-l_out // stride)
    planes = np.zeros((b, stride, l_plane, cn), dtype=dtype)
    for k in range(kernel):
        offset = k - padding
        phase = offset % stride
        shift = (offset - phase) // stride
        i_min = max(0, -shift)
        i_max = min(l - 1, (l_out - 1 - phase) // stride - shift)
        if i_max < i_min:
            continue
        planes[:, phase, i_min + shift : i_max + shift + 1, :] += g[:, i_min : i_max + 1, k, :]
    # planes[b, phase, j', n] -> y[b, n, j'*stride + phase]
    y = planes.transpose(0, 3, 2, 1).reshape(b, cn, l_plane * stride)
    return np.ascontiguousarray(y[:, :, :l_out])


def windowed_weight_grad(
    strided: np.ndarray, plain: np.ndarray, stride: int, padding: int, kernel: int
) -> np.ndarray:
    """dW[m, n, k] = sum_{b,j} strided_pad[b, m, j*stride + k] * plain[b, n, j]."""
    b, cm, _ = strided.shape
    _, cn, l_j = plain.shape
    xp = np.pad(strided, ((0, 0), (0, 0), (padding, padding)))
    win = _windows(xp, l_j, kernel, stride)
    cols = win.transpose(1, 3, 0, 2).reshape(cm * kernel, b * l_j)
    dmat = plain.transpose(0, 2, 1).reshape(b * l_j, cn)
    return (cols @ dmat).reshape(cm, kernel, cn).transpose(0, 2, 1)


class Layer:
    """Minimal layer protocol: forward caches, backward consumes the cache.

    Backward passes accumulate into the gradient buffers so a step may sum
    several forward/backward pairs; call ``zero_grads`` between steps.
    """

    def parameters(self) -> dict:
        return {}

    def gradients(self) -> dict:
        return {}

    def zero_grads(self) -> None:
        for grad in self.gradients().values():
            grad[...] = 0.0

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class Dense(Layer):
    def __init__(self, n_in: int, n_out: int, dtype=np.float32, rng=None, init_scale=0.02):
        rng = rng or np.random.default_rng(0)
        self.weight = (rng.standard_normal((n_out, n_in)) * init_scale).astype(dtype)
        self.bias = np.zeros(n_out, dtype=dtype)
        self.d_weight = np.zeros_like(self.weight)
        self.d_bias = np.zeros_like(self.bias)
        self._x = None

    def parameters(self):
        return {"weight": self.weight, "bias": self.bias}

    def gradients(self):
        return {"weight": self.d_weight, "bias": self.d_bias}

    def forward(self, x, training):
        self._x = x
        return x @ self.weight.T + self.bias

    def backward(self, dy):
        self.d_weight += dy.T @ self._x
        self.d_bias += dy.sum(axis=0)
        return dy @ self.weight


class Conv1d(Layer):
    """Strided 1-D convolution over (batch, channels, length)."""

    def __init__(self, c_in: int, c_out: int, kernel: int = 41, stride: int = 4,
                 padding: int = 19, dtype=np.float32, rng=None, init_scale=0.02):
        rng = rng or np.random.default_rng(0)
        self.kernel, self.stride, self.padding = kernel, stride, padding
        self.weight = (rng.standard_normal((c_out, c_in, kernel)) * init_scale).astype(dtype)
        self.bias = np.zeros(c_out, dtype=dtype)
        self.d_weight = np.zeros_like(self.weight)
        self.d_bias = np.zeros_like(self.bias)
        self._x = None

    def parameters(self):
        return {"weight": self.weight, "bias": self.bias}

    def gradients(self):
        return {"weight": self.d_weight, "bias": self.d_bias}

    def out_length(self, l_in: int) -> int:
        return (l_in + 2 * self.padding - self.kernel) // self.stride + 1

    def forward(self, x, training):
        self._x = x
        y = gather_conv(x, self.weight.transpose(1, 0, 2), self.stride, self.padding)
        return y + self.bias[None, :, None]

    def backward(self, dy):
        self.d_weight += windowed_weight_grad(
            self._x, dy, self.stride, self.padding, self.kernel
        ).transpose(1, 0, 2)
        self.d_bias += dy.sum(axis=(0, 2))
        return scatter_conv(
            dy, self.weight.transpose(0, 2, 1), self.stride, self.padding, self._x.shape[2]
        )


class ConvTranspose1d(Layer):
    """Strided 1-D transposed convolution; exactly multiplies length by stride.

    With kernel 41, stride 4, padding 19 and output padding 1 each layer
    maps length L to 4L, which chains the generator from its seed length to
    the full waveform. The weight lives in tap-major layout
    (c_in, kernel, c_out) so the forward scatter needs no reshuffling.
    """

    def __init__(self, c_in: int, c_out: int, kernel: int = 41, stride: int = 4,
                 padding: int = 19, output_padding: int = 1, dtype=np.float32,
                 rng=None, init_scale=0.02):
        rng = rng or np.random.default_rng(0)
        self.kernel, self.stride = kernel, stride
        self.padding, self.output_padding = padding, output_padding
        self.weight = (rng.standard_normal((c_in, kernel, c_out)) * init_scale).astype(dtype)
        self.bias = np.zeros(c_out, dtype=dtype)
        self.d_weight = np.zeros_like(self.weight)
        self.d_bias = np.zeros_like(self.bias)
        self._x = None

    def parameters(self):
        return {"weight": self.weight, "bias": self.bias}

    def gradients(self):
        return {"weight": self.d_weight, "bias": self.d_bias}

    def out_length(self, l_in: int) -> int:
        return (l_in - 1) * self.stride - 2 * self.padding + self.kernel + self.output_padding

    def forward(self, x, training):
        self._x = x
        y = scatter_conv(x, self.weight, self.stride, self.padding, self.out_length(x.shape[2]))
        return y + self.bias[None, :, None]

    def backward(self, dy):
        self.d_weight += windowed_weight_grad(
            dy, self._x, self.stride, self.padding, self.kernel
        ).transpose(1, 2, 0)
        self.d_bias += dy.sum(axis=(0, 2))
        return gather_conv(dy, self.weight.transpose(2, 0, 1), self.stride, self.padding)


class BatchNorm1d(Layer):
    """Per-channel normalization over (batch, channels, length).

    Training mode normalizes with batch statistics and updates running
    estimates; inference mode applies the frozen running statistics.
    """

    def __init__(self, channels: int, momentum: float = 0.9, eps: float = 1e-5,
                 dtype=np.float32):
        self.momentum, self.eps = momentum, eps
        self.gamma = np.ones(channels, dtype=dtype)
        self.beta = np.zeros(channels, dtype=dtype)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.d_gamma = np.zeros_like(self.gamma)
        self.d_beta = np.zeros_like(self.beta)
        self._cache = None

    def parameters(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def gradients(self):
        return {"gamma": self.d_gamma, "beta": self.d_beta}

    def state(self) -> dict:
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def forward(self, x, training):
        if training:
            mean = x.mean(axis=(0, 2))
            var = x.var(axis=(0, 2))
            self.running_mean[...] = self.momentum * self.running_mean + (1 - self.momentum) * mean
            self.running_var[...] = self.momentum * self.running_var + (1 - self.momentum) * var
        else:
            mean, var = self.running_mean, self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean[None, :, None]) * inv_std[None, :, None]
        if training:
            self._cache = (xhat, inv_std)
        return self.gamma[None, :, None] * xhat + self.beta[None, :, None]

    def backward(self, dy):
        if self._cache is None:
            raise ConfigurationError("BatchNorm backward requires a training-mode forward")
        xhat, inv_std = self._cache
        m = dy.shape[0] * dy.shape[2]
        d_gamma = (dy * xhat).sum(axis=(0, 2))
        d_beta = dy.sum(axis=(0, 2))
        self.d_gamma += d_gamma
        self.d_beta += d_beta
        coeff = (self.gamma * inv_std)[None, :, None]
        return coeff * (
            dy
            - (d_beta / m)[None, :, None]
            - xhat * (d_gamma / m)[None, :, None]
        )


class ReLU(Layer):
    def forward(self, x, training):
        self._mask = x > 0
        return x * self._mask

    def backward(self, dy):
        return dy * self._mask


class LeakyReLU(Layer):
    def __init__(self, slope: float = 0.2):
        self.slope = slope

    def forward(self, x, training):
        self._mask = x > 0
        return np.where(self._mask, x, self.slope * x)

    def backward(self, dy):
        return np.where(self._mask, dy, self.slope * dy)


class Tanh(Layer):
    def forward(self, x, training):
        self._y = np.tanh(x)
        return self._y

    def backward(self, dy):
        return dy * (1.0 - self._y**2)


class Sigmoid(Layer):
    def forward(self, x, training):
        self._y = 1.0 / (1.0 + np.exp(-x))
        return self._y

    def backward(self, dy):
        return dy * self._y * (1.0 - self._y)


class Reshape(Layer):
    """Fixed reshape of the non-batch dimensions."""

    def __init__(self, target_shape: tuple):
        self.target_shape = target_shape

    def forward(self, x, training):
        self._source_shape = x.shape[1:]
        return x.reshape((x.shape[0],) + self.target_shape)

    def backward(self, dy):
        return dy.reshape((dy.shape[0],) + self._source_shape)
