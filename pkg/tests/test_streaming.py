import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_small_network, toy_network
from tdpnet.exceptions import DimensionError, StateError, UnsupportedArchitectureError
from tdpnet.network import (LayerSpec, NetworkSpec, batch_macs, canonical_network, infer_batch,
                            infer_windows, peak_intermediate_bytes, random_weights, zero_weights)
from tdpnet.streaming import (StreamState, derive_plan, plan_memory_bytes, step_cost_ops,
                              stream_spectrogram)

RTOL, ATOL = 1e-5, 1e-6


def assert_stream_matches_batch(net, store, x):
    plan = derive_plan(net)
    width = plan.window
    np.testing.assert_allclose(stream_spectrogram(plan, store, x, "sliding"),
                               infer_windows(net, store, x, 1), rtol=RTOL, atol=ATOL)
    np.testing.assert_allclose(stream_spectrogram(plan, store, x, "tumbling"),
                               infer_windows(net, store, x, width), rtol=RTOL, atol=ATOL)
    np.testing.assert_allclose(stream_spectrogram(plan, store, x, "full"),
                               [infer_batch(net, store, x)], rtol=RTOL, atol=ATOL)


def test_canonical_plan():
    plan = derive_plan(canonical_network())
    assert plan.p0 == 4
    assert plan.p == [4, 4, 2, 2, 1, 1, 1]
    assert plan.window == 6


def test_toy_plan():
    plan = derive_plan(toy_network())
    assert plan.p0 == 2
    assert plan.p == [2, 2]
    assert plan.b == [2, 1]
    assert plan.layers[-1].p_out == 1


def test_toy_stream_equals_hand_convolution():
    net = toy_network()
    store = random_weights(net, 2)
    x = np.random.default_rng(2).normal(size=(8, 4, 1)).astype(np.float32)
    k0, k1 = store.kernel("L0"), store.kernel("L1")
    xp = np.pad(x[:, :, 0], ((1, 1), (0, 0)))
    h = np.array([k0.weights[:, 0, 0, 0] @ xp[i:i + 3] for i in range(8)]) + k0.bias[0]
    hp = np.pad(h, ((0, 1), (0, 0)))
    g = np.array([k1.weights[:, 0, 0, 0] @ hp[2 * i:2 * i + 3] for i in range(4)]) + k1.bias[0]
    z = store.kernel("out").weights.item() * g.mean(axis=0) + store.kernel("out").bias[0]
    expected = 1 / (1 + np.exp(-z))
    got = stream_spectrogram(derive_plan(net), store, x, "sliding")
    np.testing.assert_allclose(got, [expected[0]], rtol=1e-5)


def test_toy_plan_smaller_than_batch():
    net = toy_network()
    assert plan_memory_bytes(derive_plan(net)) < peak_intermediate_bytes(net)


def test_stride_one_network_has_unit_windows():
    layers = tuple(LayerSpec(f"C{i}", "conv", 3, 3, 1, 1, 1, 1, "relu") for i in range(5))
    net = NetworkSpec(layers + (LayerSpec("At", "avg_pool_t", kt=4),), input_t=4, input_f=8)
    assert derive_plan(net).p == [1] * 5


def test_single_pointwise_layer_accounting():
    net = NetworkSpec((LayerSpec("C", "conv"), LayerSpec("At", "avg_pool_t", kt=3)),
                      input_t=3, input_f=10)
    plan = derive_plan(net)
    assert plan.layers[0].ring_bytes == (0 + 1) * 10 * 1 * 4
    assert step_cost_ops(plan) == plan.p0 * 10


def test_canonical_memory_constant_and_below_batch():
    net = canonical_network()
    plan = derive_plan(net)
    mem = plan_memory_bytes(plan)
    assert mem <= 90_000
    assert peak_intermediate_bytes(net, 24) / mem >= 2.7
    assert peak_intermediate_bytes(net, 232) / mem >= 27
    state = StreamState(plan, zero_weights(net))
    assert state.buffer_bytes == mem
    for _ in range(58):
        state.push_columns(np.zeros((4, 64)))
    assert state.buffer_bytes == mem


def test_step_cost_constant_and_total_equals_batch(canonical_random):
    net, store = canonical_random
    plan = derive_plan(net)
    state = StreamState(plan, store)
    x = np.random.default_rng(0).normal(size=(40, 64)).astype(np.float32)
    costs = []
    for i in range(0, 40, 4):
        state.push_columns(x[i:i + 4])
        costs.append(state.last_step_macs)
    state.flush()
    steady = costs.index(step_cost_ops(plan))
    assert steady <= len(plan.layers)
    assert costs[:steady] == sorted(costs[:steady])
    assert all(c == step_cost_ops(plan) for c in costs[steady:])
    assert state.total_macs == batch_macs(net, 40)


def test_first_output_and_sliding_count(canonical_random):
    net, store = canonical_random
    plan = derive_plan(net)
    rng = np.random.default_rng(1)
    x = rng.normal(size=(24, 64)).astype(np.float32)
    out = stream_spectrogram(plan, store, x)
    assert len(out) == 1
    assert out[0] == pytest.approx(infer_batch(net, store, x[..., None]), rel=RTOL)
    long = rng.normal(size=(232, 64)).astype(np.float32)
    assert len(stream_spectrogram(plan, store, long)) == 1 + (232 - 24) // 4 == 53
    assert_stream_matches_batch(net, store, long[..., None])


def test_zero_weights_give_half():
    net = canonical_network()
    out = stream_spectrogram(derive_plan(net), zero_weights(net), np.zeros((48, 64)))
    np.testing.assert_array_equal(out, 0.5)


def test_outputs_per_push_and_lag(canonical_random):
    net, store = canonical_random
    plan = derive_plan(net)
    state = StreamState(plan, store)
    produced = [state.push_columns(np.ones((4, 64))) is not None for _ in range(12)]
    first = produced.index(True)
    assert all(produced[first:])
    total = 1 + (48 - 24) // 4
    assert len(state.flush()) == total - (12 - first)


def test_reset_and_state_errors(canonical_random):
    net, store = canonical_random
    plan = derive_plan(net)
    state = StreamState(plan, store)
    with pytest.raises(DimensionError):
        state.push_columns(np.zeros((3, 64)))
    for _ in range(6):
        state.push_columns(np.ones((4, 64)))
    first = state.flush()
    with pytest.raises(StateError):
        state.push_columns(np.ones((4, 64)))
    state.reset()
    for _ in range(6):
        state.push_columns(np.ones((4, 64)))
    assert state.flush() == first
    short = StreamState(plan, store)
    short.push_columns(np.ones((4, 64)))
    with pytest.raises(DimensionError):
        short.flush()


def test_unsupported_architectures():
    no_at = NetworkSpec((LayerSpec("C", "conv"),), input_t=2, input_f=4)
    with pytest.raises(UnsupportedArchitectureError):
        derive_plan(no_at)
    wide_stride = NetworkSpec((LayerSpec("C", "conv", 1, 1, 2, 1), LayerSpec("At", "avg_pool_t", kt=2)),
                              input_t=4, input_f=4)
    with pytest.raises(UnsupportedArchitectureError):
        derive_plan(wide_stride)


def test_float64_accumulation_matches(canonical_random):
    net, store = canonical_random
    x = np.random.default_rng(3).normal(size=(32, 64, 1)).astype(np.float32)
    plan = derive_plan(net)
    np.testing.assert_allclose(stream_spectrogram(plan, store, x, "sliding", accumulate64=True),
                               infer_windows(net, store, x, 1, accumulate64=True), rtol=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 6))
def test_random_small_networks_match_batch(seed, extra_steps):
    rng = np.random.default_rng(seed)
    net = random_small_network(rng)
    store = random_weights(net, rng)
    p0 = derive_plan(net).p0
    x = rng.normal(size=(net.input_t + extra_steps * p0, net.input_f, 1)).astype(np.float32)
    assert_stream_matches_batch(net, store, x)
