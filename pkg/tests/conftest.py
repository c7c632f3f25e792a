"""Shared oracles and network builders for the test suite."""
import numpy as np
import pytest

from tdpnet.network import LayerSpec, NetworkSpec, random_weights


def loop_conv_same(x, weights, bias, stride_t=1, stride_f=1):
    """Direct nested-loop same-padded convolution, written independently of the package."""
    t, f, c_in = x.shape
    kt, kf, _, c_out = weights.shape

    def pads(n, k, s):
        out = -(-n // s)
        total = max((out - 1) * s + k - n, 0)
        return out, total // 2

    ot, pt = pads(t, kt, stride_t)
    of, pf = pads(f, kf, stride_f)
    y = np.zeros((ot, of, c_out), np.float64)
    for i in range(ot):
        for j in range(of):
            for o in range(c_out):
                acc = float(bias[o])
                for a in range(kt):
                    for b in range(kf):
                        ti, fi = i * stride_t + a - pt, j * stride_f + b - pf
                        if 0 <= ti < t and 0 <= fi < f:
                            acc += float(np.dot(x[ti, fi, :], weights[a, b, :, o]))
                y[i, j, o] = acc
    return y


def toy_network():
    """Two temporal conv layers (kernel 3, strides 1 then 2), 8 columns of 4 bins."""
    layers = (
        LayerSpec("L0", "conv", 3, 1, 1, 1, 1, 1, "none"),
        LayerSpec("L1", "conv", 3, 1, 2, 1, 1, 1, "none"),
        LayerSpec("At", "avg_pool_t", kt=4),
        LayerSpec("out", "conv", 1, 1, 1, 1, 1, 1, "sigmoid"),
    )
    return NetworkSpec(layers, input_t=8, input_f=4, input_c=1)


def random_small_network(rng):
    """1 to 4 temporal conv layers with kernels in {1, 3}, strides in {1, 2} (stride <= kernel)."""
    depth = int(rng.integers(1, 5))
    f = int(rng.choice([4, 8]))
    c = 1
    layers = []
    p0 = 1
    for i in range(depth):
        kt = int(rng.choice([1, 3]))
        st = int(rng.choice([1, 2])) if kt == 3 else 1
        kf = int(rng.choice([1, 3]))
        c_out = int(rng.integers(1, 4))
        act = str(rng.choice(["relu", "none"]))
        layers.append(LayerSpec(f"C{i}", "conv", kt, kf, st, 1, c, c_out, act))
        c = c_out
        p0 *= st
    if rng.random() < 0.5:
        layers.append(LayerSpec("Af", "avg_pool_f", kt=1, kf=2, c_in=c, c_out=c))
    window = int(rng.integers(1, 5))
    layers.append(LayerSpec("At", "avg_pool_t", kt=window, c_in=c, c_out=c))
    layers.append(LayerSpec("out", "conv", 1, 1, 1, 1, c, 1, "sigmoid"))
    return NetworkSpec(tuple(layers), input_t=window * p0, input_f=f, input_c=1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def toy():
    return toy_network()


@pytest.fixture(scope="session")
def canonical_random():
    from tdpnet.network import canonical_network
    net = canonical_network()
    return net, random_weights(net, 7)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
