"""Sequential CNN description, weight store and layer-by-layer reference inference."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .exceptions import DimensionError, WeightError
from .tensor import (ACTIVATIONS, DTYPE, ConvKernel, as_tensor3, avg_pool,
                     conv2d_same)

BYTES_PER_VALUE = 4
LAYER_KINDS = ("conv", "dropout", "avg_pool_f", "avg_pool_t")


@dataclass(frozen=True)
class LayerSpec:
    """One row of a sequential network.

    For pooling layers ``kt``/``kf`` hold the pooling window.  ``avg_pool_t``
    always averages the whole time axis it receives; its ``kt`` is the number
    of entries it covers for the network's nominal input length.
    """

    name: str
    kind: str
    kt: int = 1
    kf: int = 1
    stride_t: int = 1
    stride_f: int = 1
    c_in: int = 1
    c_out: int = 1
    activation: str = "none"

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.kind != "conv" and self.c_in != self.c_out:
            raise DimensionError(f"{self.name}: non-conv layer must keep channel count")

    @property
    def is_conv(self) -> bool:
        return self.kind == "conv"

    @property
    def parameter_count(self) -> int:
        if not self.is_conv:
            return 0
        return self.kt * self.kf * self.c_in * self.c_out + self.c_out

    def output_shape(self, shape: tuple[int, int, int]) -> tuple[int, int, int]:
        t, f, c = shape
        if c != self.c_in:
            raise DimensionError(f"{self.name}: expects {self.c_in} channels, got {c}")
        if self.kind == "conv":
            return -(-t // self.stride_t), -(-f // self.stride_f), self.c_out
        if self.kind == "dropout":
            return shape
        if self.kind == "avg_pool_f":
            if f % self.kf or t % self.kt:
                raise DimensionError(f"{self.name}: window {(self.kt, self.kf)} does not divide {(t, f)}")
            return t // self.kt, f // self.kf, c
        return 1, f, c


@dataclass(frozen=True)
class NetworkSpec:
    """Ordered layers plus the nominal input shape."""

    layers: tuple[LayerSpec, ...]
    input_t: int = 24
    input_f: int = 64
    input_c: int = 1

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        names = [layer.name for layer in self.layers]
        if len(set(names)) != len(names):
            raise ValueError("layer names must be unique")
        self.shapes()

    @property
    def input_shape(self) -> tuple[int, int, int]:
        return self.input_t, self.input_f, self.input_c

    @property
    def conv_layers(self) -> list[LayerSpec]:
        return [layer for layer in self.layers if layer.is_conv]

    @property
    def parameter_count(self) -> int:
        return sum(layer.parameter_count for layer in self.layers)

    def layer(self, name: str) -> LayerSpec:
        for layer in self.layers:
            if layer.name == name:
                return layer
        raise KeyError(name)

    def shapes(self, input_t: Optional[int] = None) -> list[tuple[tuple, tuple]]:
        """Input and output shape of every layer for a given input length."""
        shape = (input_t or self.input_t, self.input_f, self.input_c)
        out = []
        for layer in self.layers:
            nxt = layer.output_shape(shape)
            out.append((shape, nxt))
            shape = nxt
        return out

    def time_downsampling(self) -> int:
        """Product of temporal strides before the time-average layer."""
        p = 1
        for layer in self.layers:
            if layer.kind == "avg_pool_t":
                break
            if layer.is_conv:
                p *= layer.stride_t
        return p


def canonical_network() -> NetworkSpec:
    """The 14-row seismic classifier: 24x64x1 spectrogram in, probability out."""
    conv = LayerSpec
    layers = (
        conv("C0", "conv", 3, 3, 1, 1, 1, 32, "relu"),
        conv("C1", "conv", 3, 3, 2, 2, 32, 32, "relu"),
        LayerSpec("D0", "dropout", c_in=32, c_out=32),
        conv("C2", "conv", 3, 3, 1, 1, 32, 32, "relu"),
        conv("C3", "conv", 3, 3, 2, 2, 32, 32, "relu"),
        LayerSpec("D1", "dropout", c_in=32, c_out=32),
        conv("C4", "conv", 3, 3, 1, 1, 32, 32, "relu"),
        conv("C5", "conv", 1, 1, 1, 1, 32, 32, "relu"),
        LayerSpec("D2", "dropout", c_in=32, c_out=32),
        # Af takes 6x16x1, so C6 must reduce 32 channels to 1.
        conv("C6", "conv", 1, 1, 1, 1, 32, 1, "relu"),
        LayerSpec("Af", "avg_pool_f", kt=1, kf=16),
        LayerSpec("At", "avg_pool_t", kt=6, kf=1),
        conv("C7", "conv", 1, 1, 1, 1, 1, 1, "sigmoid"),
    )
    return NetworkSpec(layers, 24, 64, 1)


@dataclass(frozen=True)
class WeightStore:
    """Per-conv-layer parameters of a network.

    Each entry of ``layers`` is either a :class:`ConvKernel` (float32) or a
    quantized layer exposing ``to_kernel()`` and ``dtype_tag == 1``.
    """

    network: NetworkSpec
    layers: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "layers", dict(self.layers))
        self.validate()

    def validate(self) -> None:
        expected = {layer.name: layer for layer in self.network.conv_layers}
        extra = set(self.layers) - set(expected)
        if extra:
            raise WeightError(f"weights for unknown layers: {sorted(extra)}")
        for name, spec in expected.items():
            if name not in self.layers:
                raise WeightError(f"missing weights for layer {name}")
            shape = (spec.kt, spec.kf, spec.c_in, spec.c_out)
            got = tuple(self.layers[name].weights_shape) if hasattr(
                self.layers[name], "weights_shape") else self.layers[name].weights.shape
            if got != shape:
                raise WeightError(f"layer {name}: weights {got}, expected {shape}")

    @property
    def is_quantized(self) -> bool:
        return any(getattr(p, "dtype_tag", 0) == 1 for p in self.layers.values())

    def kernel(self, name: str) -> ConvKernel:
        p = self.layers[name]
        return p if isinstance(p, ConvKernel) else p.to_kernel()

    def payload_bytes(self) -> int:
        """Bytes of raw parameter payload: 4 per float value, 1 per code."""
        total = 0
        for p in self.layers.values():
            n = p.parameter_count
            total += n if getattr(p, "dtype_tag", 0) == 1 else BYTES_PER_VALUE * n
        return total


def zero_weights(net: NetworkSpec) -> WeightStore:
    return WeightStore(net, {layer.name: ConvKernel.zeros(layer.kt, layer.kf, layer.c_in, layer.c_out)
                             for layer in net.conv_layers})


def random_weights(net: NetworkSpec, rng=None, bias_scale: float = 0.1) -> WeightStore:
    """He-normal weights and small normal biases; for tests and demos."""
    rng = np.random.default_rng(rng)
    layers = {}
    for layer in net.conv_layers:
        fan_in = layer.kt * layer.kf * layer.c_in
        w = rng.normal(0.0, np.sqrt(2.0 / fan_in), (layer.kt, layer.kf, layer.c_in, layer.c_out))
        b = rng.normal(0.0, bias_scale, layer.c_out)
        layers[layer.name] = ConvKernel(w, b)
    return WeightStore(net, layers)


def apply_layer(layer: LayerSpec, x: np.ndarray, store: WeightStore,
                accumulate64: bool = False) -> np.ndarray:
    """Run one layer on a whole tensor (batch semantics)."""
    if layer.kind == "conv":
        y = conv2d_same(x, store.kernel(layer.name), layer.stride_t, layer.stride_f, accumulate64)
        return ACTIVATIONS[layer.activation](y)
    if layer.kind == "dropout":
        return x
    if layer.kind == "avg_pool_f":
        return avg_pool(x, layer.kt, layer.kf)
    return x.mean(axis=0, keepdims=True, dtype=DTYPE)


def _check_input(net: NetworkSpec, store: WeightStore, x) -> np.ndarray:
    if store.network != net:
        raise WeightError("weight store was built for a different network")
    x = as_tensor3(x)
    t, f, c = x.shape
    if (f, c) != (net.input_f, net.input_c):
        raise DimensionError(f"input is {x.shape}, network expects (T, {net.input_f}, {net.input_c})")
    p0 = net.time_downsampling()
    if t < net.input_t or t % p0:
        raise DimensionError(
            f"input length {t} must be >= {net.input_t} and a multiple of {p0}")
    return x


def forward_features(net: NetworkSpec, store: WeightStore, x,
                     accumulate64: bool = False) -> np.ndarray:
    """Run every layer before the time average; returns its input sequence."""
    x = _check_input(net, store, x)
    for layer in net.layers:
        if layer.kind == "avg_pool_t":
            return x
        x = apply_layer(layer, x, store, accumulate64)
    raise DimensionError("network has no time-average layer")


def head(net: NetworkSpec, store: WeightStore, pooled: np.ndarray,
         accumulate64: bool = False) -> float:
    """Apply the layers after the time average to a pooled ``(1, f, c)`` tensor."""
    idx = [layer.kind for layer in net.layers].index("avg_pool_t")
    y = pooled
    for layer in net.layers[idx + 1:]:
        y = apply_layer(layer, y, store, accumulate64)
    return float(y.reshape(-1)[0])


def infer_batch(net: NetworkSpec, store: WeightStore, x, accumulate64: bool = False) -> float:
    """Layer-by-layer inference of one window; returns the output probability.

    Inputs longer than the nominal window are allowed as long as their length
    is a multiple of the network's temporal downsampling; the time average
    then spans all of them.
    """
    feats = forward_features(net, store, x, accumulate64)
    pooled = feats.mean(axis=0, keepdims=True, dtype=DTYPE)
    return head(net, store, pooled, accumulate64)


def infer_windows(net: NetworkSpec, store: WeightStore, x, hop: int = 1,
                  accumulate64: bool = False) -> np.ndarray:
    """Windowed probabilities of a long input, computed layer by layer.

    The whole sequence is processed once, then the time average slides over
    ``net.layer('At').kt`` consecutive entries with the given ``hop``.
    """
    feats = forward_features(net, store, x, accumulate64)
    width = next(layer.kt for layer in net.layers if layer.kind == "avg_pool_t")
    probs = []
    for start in range(0, feats.shape[0] - width + 1, hop):
        pooled = feats[start:start + width].mean(axis=0, keepdims=True, dtype=DTYPE)
        probs.append(head(net, store, pooled, accumulate64))
    return np.asarray(probs)


def peak_intermediate_bytes(net: NetworkSpec, input_t: Optional[int] = None) -> int:
    """Largest producer-plus-consumer buffer pair in layer-by-layer execution.

    Dropout runs in place and is skipped; the network input counts as the
    first buffer.
    """
    shapes = net.shapes(input_t)
    sizes = [int(np.prod(shapes[0][0]))] if shapes else []
    for layer, (_, out) in zip(net.layers, shapes):
        if layer.kind != "dropout":
            sizes.append(int(np.prod(out)))
    if len(sizes) < 2:
        return BYTES_PER_VALUE * sum(sizes)
    return BYTES_PER_VALUE * max(a + b for a, b in zip(sizes, sizes[1:]))


def batch_macs(net: NetworkSpec, input_t: Optional[int] = None) -> int:
    """Multiply-accumulates of all convolutions before the time average."""
    total = 0
    for layer, (_, out) in zip(net.layers, net.shapes(input_t)):
        if layer.kind == "avg_pool_t":
            break
        if layer.is_conv:
            total += out[0] * out[1] * layer.kt * layer.kf * layer.c_in * layer.c_out
    return total
