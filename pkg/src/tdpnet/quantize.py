"""Power-of-two weight quantization with one-byte codes.

A layer's codebook is ``{0} U {+-2**k : n1 <= k <= n2}`` with seven exponent
levels, where ``n2 = floor(log2(4 * max|w| / 3))``.  Each parameter is
projected onto the nearest codebook element (ties go to the larger
magnitude) and stored as one byte::

    bit 7     sign
    bit 6     zero flag
    bits 5-3  reserved, must be 0
    bits 2-0  exponent index k - n1
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import FormatError, ParameterError
from .network import NetworkSpec, WeightStore, infer_batch
from .tensor import DTYPE, ConvKernel

N_LEVELS = 7
SIGN_BIT = 0x80
ZERO_FLAG = 0x40
INDEX_MASK = 0x07
RESERVED_MASK = 0x38


@dataclass(frozen=True)
class Pow2Codebook:
    n1: int
    n2: int

    def __post_init__(self):
        if self.n1 > self.n2:
            raise ParameterError(f"n1={self.n1} must not exceed n2={self.n2}")

    @classmethod
    def fit(cls, w, levels: int = N_LEVELS) -> "Pow2Codebook":
        """Choose the exponent range from the largest magnitude in ``w``.

        An all-zero tensor gets the placeholder range ``[-levels+1, 0]``.
        """
        m = float(np.max(np.abs(w), initial=0.0))
        if m == 0.0:
            return cls(1 - levels, 0)
        n2 = int(np.floor(np.log2(4.0 * m / 3.0)))
        return cls(n2 - levels + 1, n2)

    @property
    def levels(self) -> int:
        return self.n2 - self.n1 + 1

    def values(self) -> np.ndarray:
        """Every representable value, sorted ascending."""
        pos = np.ldexp(1.0, np.arange(self.n1, self.n2 + 1))
        return np.concatenate([-pos[::-1], [0.0], pos])

    def exponents(self, w) -> np.ndarray:
        """Rounded exponent per element, or ``n1 - 1`` where the element maps to zero."""
        a = np.abs(np.asarray(w, dtype=np.float64))
        mant, e = np.frexp(a)  # a = mant * 2**e, mant in [0.5, 1)
        e = e - 1  # floor(log2 a) for a > 0
        up = mant >= 0.75  # a >= 1.5 * 2**floor(log2 a)
        r = np.clip(e + up, self.n1, self.n2)
        below = a < np.ldexp(1.0, self.n1 - 1)
        return np.where(below, self.n1 - 1, r)

    def quantize(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=np.float64)
        r = self.exponents(w)
        q = np.where(r < self.n1, 0.0, np.sign(w) * np.ldexp(1.0, np.maximum(r, self.n1)))
        return q

    def encode(self, w) -> np.ndarray:
        if self.levels > INDEX_MASK:
            raise ParameterError(f"{self.levels} exponent levels do not fit a 3-bit index")
        w = np.asarray(w, dtype=np.float64)
        r = self.exponents(w)
        zero = r < self.n1
        codes = np.where(zero, ZERO_FLAG, (r - self.n1) | np.where(w < 0, SIGN_BIT, 0))
        return codes.astype(np.uint8)

    def decode(self, codes) -> np.ndarray:
        codes = np.asarray(codes, dtype=np.uint8)
        idx = codes & INDEX_MASK
        zero = (codes & ZERO_FLAG) != 0
        bad = ((codes & RESERVED_MASK) != 0) | (~zero & (idx >= self.levels)) \
            | (zero & (codes != ZERO_FLAG))
        if np.any(bad):
            raise FormatError(f"corrupt code byte 0x{int(codes[bad].flat[0]):02x}")
        mag = np.ldexp(1.0, self.n1 + idx.astype(np.int64))
        val = np.where((codes & SIGN_BIT) != 0, -mag, mag)
        return np.where(zero, 0.0, val).astype(DTYPE)


def quantize_pow2(w: float, book: Pow2Codebook) -> float:
    """Nearest codebook element to a single value."""
    return float(book.quantize(np.asarray([w]))[0])


@dataclass(frozen=True)
class QuantizedLayer:
    """One-byte codes for a conv layer's weights and bias plus its codebook."""

    weight_codes: np.ndarray
    bias_codes: np.ndarray
    codebook: Pow2Codebook
    dtype_tag = 1

    @property
    def weights_shape(self) -> tuple:
        return self.weight_codes.shape

    @property
    def parameter_count(self) -> int:
        return self.weight_codes.size + self.bias_codes.size

    def to_kernel(self) -> ConvKernel:
        return ConvKernel(self.codebook.decode(self.weight_codes), self.codebook.decode(self.bias_codes))

    @classmethod
    def from_kernel(cls, kernel: ConvKernel, levels: int = N_LEVELS) -> "QuantizedLayer":
        book = Pow2Codebook.fit(np.concatenate([kernel.weights.ravel(), kernel.bias]), levels)
        return cls(book.encode(kernel.weights), book.encode(kernel.bias), book)


def quantize_store(store: WeightStore) -> WeightStore:
    """Project every conv layer (weights and biases) onto its own codebook."""
    layers = {name: QuantizedLayer.from_kernel(store.kernel(name)) for name in store.layers}
    return WeightStore(store.network, layers)


def dequantize_store(store: WeightStore) -> WeightStore:
    return WeightStore(store.network, {name: store.kernel(name) for name in store.layers})


def dequantize_infer(net: NetworkSpec, qstore: WeightStore, x) -> float:
    """Batch inference with decoded power-of-two weights."""
    return infer_batch(net, dequantize_store(qstore), x)


def quantization_report(store: WeightStore) -> list[dict]:
    """Per-layer byte counts, codebook and largest projection error."""
    rows = []
    for name in store.layers:
        k = store.kernel(name)
        q = QuantizedLayer.from_kernel(k)
        deq = q.to_kernel()
        err = max(float(np.max(np.abs(k.weights - deq.weights), initial=0.0)),
                  float(np.max(np.abs(k.bias - deq.bias), initial=0.0)))
        rows.append({"layer": name, "params": k.parameter_count,
                     "float_bytes": 4 * k.parameter_count, "quantized_bytes": q.parameter_count,
                     "n1": q.codebook.n1, "n2": q.codebook.n2, "max_error": err})
    return rows


class Pow2Quantizer(BaseEstimator, TransformerMixin):
    """Project an array onto a power-of-two codebook fitted to its range.

    With ``max|w| = 0.6`` the codebook spans ``2**-7 .. 2**-1``, so
    ``[0.3, -0.6, 0.01]`` becomes ``[0.25, -0.5, 2**-7]``.
    """

    def __init__(self, n_levels: int = N_LEVELS):
        self.n_levels = n_levels

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=np.float64)
        if not np.all(np.isfinite(X)):
            raise ParameterError("weights must be finite")
        self.codebook_ = Pow2Codebook.fit(X, self.n_levels)
        return self

    def transform(self, X):
        check_is_fitted(self, "codebook_")
        return self.codebook_.quantize(X)

    def encode(self, X) -> np.ndarray:
        check_is_fitted(self, "codebook_")
        return self.codebook_.encode(X)
