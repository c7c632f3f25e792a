"""Dense (time, frequency, channel) tensors and the numeric kernels of the network.

Tensors are plain ``numpy`` arrays of shape ``(t_len, f_len, c_len)`` with
``float32`` values stored in row-major order.  All kernels are pure functions.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .exceptions import DimensionError

DTYPE = np.float32


def as_tensor3(x, name: str = "input") -> np.ndarray:
    """Validate ``x`` as a non-empty rank-3 tensor and return it as float32."""
    arr = np.asarray(x, dtype=DTYPE)
    if arr.ndim != 3:
        raise DimensionError(f"{name} must be rank 3 (t, f, c), got shape {arr.shape}")
    if arr.size == 0:
        raise DimensionError(f"{name} is empty: shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class ConvKernel:
    """Weights ``(kt, kf, c_in, c_out)`` and bias ``(c_out,)`` of a 2D convolution."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=DTYPE)
        b = np.asarray(self.bias, dtype=DTYPE).reshape(-1)
        if w.ndim != 4:
            raise DimensionError(f"kernel weights must be rank 4, got shape {w.shape}")
        if b.shape[0] != w.shape[3]:
            raise DimensionError(f"bias length {b.shape[0]} != c_out {w.shape[3]}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def kt(self) -> int:
        return self.weights.shape[0]

    @property
    def kf(self) -> int:
        return self.weights.shape[1]

    @property
    def c_in(self) -> int:
        return self.weights.shape[2]

    @property
    def c_out(self) -> int:
        return self.weights.shape[3]

    @property
    def parameter_count(self) -> int:
        return self.weights.size + self.bias.size

    @classmethod
    def zeros(cls, kt: int, kf: int, c_in: int, c_out: int) -> "ConvKernel":
        return cls(np.zeros((kt, kf, c_in, c_out), DTYPE), np.zeros(c_out, DTYPE))


def same_padding(n: int, k: int, s: int) -> tuple[int, int]:
    """Return ``(before, after)`` zero padding for a "same" convolution.

    The output length is ``ceil(n / s)``.  An odd total puts the extra zero
    at the trailing edge.
    """
    out = -(-n // s)
    total = max((out - 1) * s + k - n, 0)
    return total // 2, total - total // 2


def conv2d_valid(x: np.ndarray, kernel: ConvKernel, stride_t: int = 1,
                 stride_f: int = 1, accumulate64: bool = False) -> np.ndarray:
    """Unpadded strided convolution plus bias of an already padded tensor."""
    kt, kf = kernel.kt, kernel.kf
    if x.shape[0] < kt or x.shape[1] < kf:
        raise DimensionError(f"input {x.shape[:2]} smaller than kernel {(kt, kf)}")
    w = kernel.weights
    if accumulate64:
        x = x.astype(np.float64)
        w = w.astype(np.float64)
    # (t_out, f_out, c_in, kt, kf)
    win = sliding_window_view(x, (kt, kf), axis=(0, 1))[::stride_t, ::stride_f]
    out = np.tensordot(win, w, axes=([3, 4, 2], [0, 1, 2]))
    out += kernel.bias
    return out.astype(DTYPE, copy=False)


def conv2d_same(x, kernel: ConvKernel, stride_t: int = 1, stride_f: int = 1,
                accumulate64: bool = False) -> np.ndarray:
    """Strided 2D convolution with zero "same" padding on both axes.

    Parameters
    ----------
    x : array of shape (t_len, f_len, c_in)
    kernel : ConvKernel
    stride_t, stride_f : int
        Strides along time and frequency, both >= 1.
    accumulate64 : bool
        Accumulate in float64 instead of float32.

    Returns
    -------
    ndarray of shape (ceil(t_len / stride_t), ceil(f_len / stride_f), c_out)
    """
    x = as_tensor3(x)
    if stride_t < 1 or stride_f < 1:
        raise DimensionError(f"strides must be >= 1, got ({stride_t}, {stride_f})")
    if x.shape[2] != kernel.c_in:
        raise DimensionError(f"input has {x.shape[2]} channels, kernel expects {kernel.c_in}")
    pt = same_padding(x.shape[0], kernel.kt, stride_t)
    pf = same_padding(x.shape[1], kernel.kf, stride_f)
    xp = np.pad(x, (pt, pf, (0, 0)))
    return conv2d_valid(xp, kernel, stride_t, stride_f, accumulate64)


def conv2d_time_valid(x: np.ndarray, kernel: ConvKernel, stride_t: int = 1,
                      stride_f: int = 1, accumulate64: bool = False) -> np.ndarray:
    """Convolution that is unpadded along time and "same" along frequency.

    Used on a window of temporal columns whose time padding is managed by
    the caller (the streaming engine primes its buffers with zeros).
    """
    pf = same_padding(x.shape[1], kernel.kf, stride_f)
    xp = np.pad(x, ((0, 0), pf, (0, 0)))
    return conv2d_valid(xp, kernel, stride_t, stride_f, accumulate64)


def relu(x) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=DTYPE), DTYPE(0))


def sigmoid(x):
    """Logistic function, evaluated without overflow for large ``|x|``."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out.item() if out.ndim == 0 else out


def avg_pool(x, window_t: int, window_f: int) -> np.ndarray:
    """Non-overlapping mean over ``window_t x window_f`` blocks."""
    x = as_tensor3(x)
    t, f, c = x.shape
    if window_t < 1 or window_f < 1 or t % window_t or f % window_f:
        raise DimensionError(
            f"pool window {(window_t, window_f)} does not divide input {(t, f)}")
    blocks = x.reshape(t // window_t, window_t, f // window_f, window_f, c)
    return blocks.mean(axis=(1, 3), dtype=DTYPE)


ACTIVATIONS = {
    "relu": relu,
    "sigmoid": lambda x: np.asarray(sigmoid(x), dtype=DTYPE),
    "none": lambda x: np.asarray(x, dtype=DTYPE),
}
