"""Time-distributed processing: constant-memory streaming inference.

Every temporal layer up to the time average keeps a small ring of input
columns (a carry buffer followed by a processing window).  Each push feeds
``p0`` new spectrogram columns through the rings.  Each layer computes every
output whose receptive field is complete and retires the columns no future
output needs.  The frequency axis is never streamed.

Batch "same" padding is reproduced exactly.  Leading zeros are pre-loaded
into each ring, and the trailing zeros are appended by :meth:`StreamState.flush`
once the stream ends.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import DimensionError, StateError, UnsupportedArchitectureError
from .network import (BYTES_PER_VALUE, LayerSpec, NetworkSpec, WeightStore,
                      apply_layer)
from .tensor import ACTIVATIONS, DTYPE, avg_pool, conv2d_time_valid, same_padding

OUTPUT_MODES = ("sliding", "tumbling", "full")


@dataclass(frozen=True)
class LayerPlan:
    """Buffer geometry of one streamed layer.

    ``p_in`` new columns arrive per step and ``carry`` columns are retained
    between steps.  ``capacity`` is the ring size actually allocated.
    """

    name: str
    kernel_t: int
    stride_t: int
    pad_before: int
    p_in: int
    p_out: int
    carry: int
    capacity: int
    f_len: int
    c_len: int
    f_out: int
    macs_per_output: int

    @property
    def ring_bytes(self) -> int:
        return self.capacity * self.f_len * self.c_len * BYTES_PER_VALUE


@dataclass(frozen=True)
class StreamPlan:
    network: NetworkSpec
    layers: tuple[LayerPlan, ...]
    p0: int
    window: int
    pooled_shape: tuple[int, int]
    staging_shape: tuple[int, int, int]

    @property
    def p(self) -> list[int]:
        return [lp.p_in for lp in self.layers]

    @property
    def b(self) -> list[int]:
        return [lp.carry for lp in self.layers]

    def layer(self, name: str) -> LayerPlan:
        for lp in self.layers:
            if lp.name == name:
                return lp
        raise KeyError(name)


def _outputs_available(n_padded: int, k: int, s: int) -> int:
    return (n_padded - k) // s + 1 if n_padded >= k else 0


def _simulate_ring(k: int, s: int, pad_before: int, arrivals: list[int]):
    """Replay column counts through one layer; returns (outputs, leftovers, peaks)."""
    held = pad_before
    outs, leftovers, peaks = [], [], []
    for a in arrivals:
        peaks.append(held + a)
        held += a
        m = _outputs_available(held, k, s)
        held -= m * s
        outs.append(m)
        leftovers.append(held)
    return outs, leftovers, peaks


def derive_plan(net: NetworkSpec) -> StreamPlan:
    """Work out processing windows and carry buffers for every streamed layer.

    The processing window of conv layer ``i`` is the product of the temporal
    strides from ``i`` up to the time average.  Carry sizes are not taken
    from a closed form.  Column counts are replayed through the rings until
    the schedule is periodic, and the largest residue a layer must keep
    becomes its carry.
    """
    kinds = [layer.kind for layer in net.layers]
    if "avg_pool_t" not in kinds:
        raise UnsupportedArchitectureError("network has no time-average layer")
    at = kinds.index("avg_pool_t")
    stage: list[LayerSpec] = []
    for layer in net.layers[:at]:
        if layer.kind == "dropout":
            continue
        if layer.kind == "avg_pool_f" and layer.kt != 1:
            raise UnsupportedArchitectureError(f"{layer.name}: frequency pool must have kt == 1")
        if layer.is_conv and layer.stride_t > layer.kt:
            raise UnsupportedArchitectureError(
                f"{layer.name}: temporal stride {layer.stride_t} exceeds kernel {layer.kt}")
        stage.append(layer)
    for layer in net.layers[at + 1:]:
        if not (layer.is_conv and layer.kt == 1 and layer.kf == 1) and layer.kind != "dropout":
            raise UnsupportedArchitectureError(
                f"{layer.name}: only pointwise convolutions may follow the time average")

    convs = [layer for layer in stage if layer.is_conv]
    p_values = []
    for i in range(len(convs)):
        p = 1
        for layer in convs[i:]:
            p *= layer.stride_t
        p_values.append(p)
    p0 = p_values[0] if p_values else 1

    steps = 4 * sum(layer.kt for layer in convs) + 16
    arrivals = [p0] * steps
    shapes = dict(zip([layer.name for layer in net.layers], net.shapes()))
    plans = []
    ci = 0
    for layer in stage:
        (t_in, f_in, c_in), (_, f_out, c_out) = shapes[layer.name]
        if not layer.is_conv:
            continue
        k, s = layer.kt, layer.stride_t
        pad_before = same_padding(t_in, k, s)[0]
        outs, leftovers, peaks = _simulate_ring(k, s, pad_before, arrivals)
        half = steps // 2
        p_in, p_out = p_values[ci], p_values[ci] // s
        if any(o != p_out for o in outs[half:]):
            raise UnsupportedArchitectureError(f"{layer.name}: schedule never becomes periodic")
        plans.append(LayerPlan(
            name=layer.name, kernel_t=k, stride_t=s, pad_before=pad_before,
            p_in=p_in, p_out=p_out, carry=max(leftovers[half:]),
            capacity=max(max(peaks), pad_before),
            f_len=f_in, c_len=c_in, f_out=f_out,
            macs_per_output=f_out * k * layer.kf * c_in * c_out,
        ))
        arrivals = outs
        ci += 1

    (t_at, f_at, c_at), _ = shapes[net.layers[at].name]
    if plans:
        last = plans[-1]
        staging_shape = (last.p_out, last.f_out, shapes[last.name][1][2])
    else:
        staging_shape = (p0, net.input_f, net.input_c)
    return StreamPlan(
        network=net, layers=tuple(plans), p0=p0, window=net.layers[at].kt,
        pooled_shape=(f_at, c_at), staging_shape=staging_shape,
    )


def plan_memory_bytes(plan: StreamPlan) -> int:
    """Bytes held by the streaming buffers; independent of the input length.

    Counts every conv ring, the staging buffer holding the last conv layer's
    per-step output, and the time-average accumulator.
    """
    rings = sum(lp.ring_bytes for lp in plan.layers)
    staging = int(np.prod(plan.staging_shape)) * BYTES_PER_VALUE
    f_at, c_at = plan.pooled_shape
    accumulator = plan.window * f_at * c_at * BYTES_PER_VALUE
    return rings + staging + accumulator


def step_cost_ops(plan: StreamPlan) -> int:
    """Multiply-accumulates of one steady-state push (conv layers before the time average)."""
    return sum(lp.p_out * lp.macs_per_output for lp in plan.layers)


class StreamState:
    """Mutable buffers for one stream of spectrogram columns.

    Parameters
    ----------
    plan : StreamPlan
    store : WeightStore
    mode : {"sliding", "tumbling", "full"}
        ``sliding`` emits a probability every push once the time-average
        window is full.  ``tumbling`` emits once per disjoint window.  ``full``
        averages the whole stream and emits only on :meth:`flush`.
    """

    def __init__(self, plan: StreamPlan, store: WeightStore, mode: str = "sliding",
                 accumulate64: bool = False):
        if mode not in OUTPUT_MODES:
            raise ValueError(f"mode must be one of {OUTPUT_MODES}, got {mode!r}")
        if store.network != plan.network:
            raise StateError("weight store and plan describe different networks")
        self.plan = plan
        self.store = store
        self.mode = mode
        self.accumulate64 = accumulate64
        net = plan.network
        self._kinds = [layer.kind for layer in net.layers]
        at = self._kinds.index("avg_pool_t")
        self._stage = [layer for layer in net.layers[:at] if layer.kind != "dropout"]
        self._head = list(net.layers[at + 1:])
        self._plans = {lp.name: lp for lp in plan.layers}
        self._kernels = {lp.name: store.kernel(lp.name) for lp in plan.layers}
        self._rings = {lp.name: np.zeros((lp.capacity, lp.f_len, lp.c_len), DTYPE)
                       for lp in plan.layers}
        f_at, c_at = plan.pooled_shape
        self._acc = np.zeros((plan.window, f_at, c_at), DTYPE)
        self._acc_sum = np.zeros((f_at, c_at), np.float64)
        self.reset()

    def reset(self) -> None:
        """Return to the start-of-stream state without reallocating."""
        for name, ring in self._rings.items():
            ring[...] = 0
        self._fill = {lp.name: lp.pad_before for lp in self.plan.layers}
        self._received = {lp.name: 0 for lp in self.plan.layers}
        self._acc[...] = 0
        self._acc_sum[...] = 0
        self.entries = 0
        self.columns_seen = 0
        self.last_step_macs = 0
        self.total_macs = 0
        self.finished = False

    @property
    def warm(self) -> bool:
        return self.entries >= self.plan.window

    @property
    def buffer_bytes(self) -> int:
        """Bytes of the allocated streaming buffers."""
        staging = int(np.prod(self.plan.staging_shape)) * BYTES_PER_VALUE
        return (sum(r.nbytes for r in self._rings.values()) + self._acc.nbytes + staging)

    def _run_conv(self, layer: LayerSpec, cols: np.ndarray) -> np.ndarray:
        lp = self._plans[layer.name]
        ring = self._rings[layer.name]
        kernel = self._kernels[layer.name]
        k, s = lp.kernel_t, lp.stride_t
        self._received[layer.name] += len(cols)
        outputs = []
        pos = 0
        while True:
            n = self._fill[layer.name]
            take = min(lp.capacity - n, len(cols) - pos)
            ring[n:n + take] = cols[pos:pos + take]
            n += take
            pos += take
            m = _outputs_available(n, k, s)
            if m:
                window = ring[:(m - 1) * s + k]
                y = conv2d_time_valid(window, kernel, s, layer.stride_f, self.accumulate64)
                outputs.append(ACTIVATIONS[layer.activation](y))
                self.last_step_macs += m * lp.macs_per_output
                used = m * s
                # left shift: retire the columns no later output needs
                ring[:n - used] = ring[used:n]
                n -= used
            self._fill[layer.name] = n
            if pos == len(cols):
                break
            if take == 0 and not m:
                raise StateError(f"{layer.name}: ring overflow")
        if not outputs:
            return np.zeros((0, lp.f_out, layer.c_out), DTYPE)
        return np.concatenate(outputs, axis=0)

    def _run_stage(self, cols: np.ndarray, flush: bool = False) -> np.ndarray:
        for layer in self._stage:
            if layer.is_conv:
                out = self._run_conv(layer, cols)
                if flush:
                    lp = self._plans[layer.name]
                    after = sum(same_padding(self._received[layer.name], lp.kernel_t, lp.stride_t)) - lp.pad_before
                    if after:
                        tail = np.zeros((after, lp.f_len, lp.c_len), DTYPE)
                        self._received[layer.name] -= after
                        out = np.concatenate([out, self._run_conv(layer, tail)], axis=0)
                cols = out
            elif len(cols):
                cols = avg_pool(cols, 1, layer.kf)
        return cols

    def _apply_head(self, pooled: np.ndarray) -> float:
        y = pooled[None]
        for layer in self._head:
            y = apply_layer(layer, y, self.store, self.accumulate64)
        return float(y.reshape(-1)[0])

    def _accumulate(self, entries: np.ndarray) -> list[float]:
        w = self.plan.window
        emitted = []
        for entry in entries:
            if self.mode == "full":
                self._acc_sum += entry
            else:
                self._acc[self.entries % w] = entry
            self.entries += 1
            if self.mode == "sliding" and self.entries >= w:
                order = np.arange(self.entries - w, self.entries) % w
                emitted.append(self._apply_head(self._acc[order].mean(axis=0, dtype=DTYPE)))
            elif self.mode == "tumbling" and self.entries % w == 0:
                emitted.append(self._apply_head(self._acc.mean(axis=0, dtype=DTYPE)))
        return emitted

    def push_columns(self, cols) -> Optional[float]:
        """Feed exactly ``p0`` spectrogram columns; returns a probability or None.

        At most one probability is produced per push.
        """
        if self.finished:
            raise StateError("stream already flushed; call reset() first")
        cols = np.asarray(cols, dtype=DTYPE)
        if cols.ndim == 2:
            cols = cols[..., None]
        net = self.plan.network
        if cols.shape != (self.plan.p0, net.input_f, net.input_c):
            raise DimensionError(
                f"expected {(self.plan.p0, net.input_f, net.input_c)} columns, got {cols.shape}")
        self.last_step_macs = 0
        entries = self._run_stage(cols)
        self.total_macs += self.last_step_macs
        self.columns_seen += len(cols)
        emitted = self._accumulate(entries)
        if len(emitted) > 1:
            raise StateError("more than one output in a single step")
        return emitted[0] if emitted else None

    def flush(self) -> list[float]:
        """End the stream: apply trailing padding and emit what remains."""
        if self.finished:
            raise StateError("stream already flushed")
        if self.columns_seen < self.plan.network.input_t:
            raise DimensionError(
                f"stream has {self.columns_seen} columns, needs at least {self.plan.network.input_t}")
        self.last_step_macs = 0
        net = self.plan.network
        entries = self._run_stage(np.zeros((0, net.input_f, net.input_c), DTYPE), flush=True)
        self.total_macs += self.last_step_macs
        emitted = self._accumulate(entries)
        if self.mode == "full":
            pooled = (self._acc_sum / self.entries).astype(DTYPE)
            emitted.append(self._apply_head(pooled))
        self.finished = True
        return emitted


def stream_spectrogram(plan: StreamPlan, store: WeightStore, spec, mode: str = "sliding",
                       accumulate64: bool = False) -> np.ndarray:
    """Push a whole spectrogram through a fresh stream and collect every output."""
    spec = np.asarray(spec, dtype=DTYPE)
    if spec.ndim == 2:
        spec = spec[..., None]
    if spec.shape[0] % plan.p0:
        raise DimensionError(f"column count {spec.shape[0]} is not a multiple of {plan.p0}")
    state = StreamState(plan, store, mode, accumulate64)
    out = []
    for start in range(0, spec.shape[0], plan.p0):
        prob = state.push_columns(spec[start:start + plan.p0])
        if prob is not None:
            out.append(prob)
    out.extend(state.flush())
    return np.asarray(out)
