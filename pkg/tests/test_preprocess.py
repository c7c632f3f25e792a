import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tdpnet import preprocess as pp
from tdpnet.exceptions import DimensionError, FormatError, ParameterError


def closed_form_tukey(n, alpha):
    """Textbook piecewise definition, evaluated per sample."""
    w = np.ones(n)
    edge = alpha * (n - 1) / 2
    for i in range(n):
        d = min(i, n - 1 - i)
        if alpha > 0 and d < edge:
            w[i] = 0.5 * (1 + np.cos(np.pi * (d / edge - 1)))
    return w


def direct_dft_psd(frame, window, fs):
    n = len(frame)
    k = np.arange(n // 2 + 1)[:, None]
    basis = np.exp(-2j * np.pi * k * np.arange(n)[None, :] / n)
    power = np.abs(basis @ (frame * window)) ** 2 / (fs * np.sum(window ** 2))
    power[1:-1] *= 2
    return power


def test_tukey_limits_and_shape():
    np.testing.assert_allclose(pp.tukey_window(64, 0.0), np.ones(64))
    np.testing.assert_allclose(pp.tukey_window(64, 1.0), np.hanning(64), atol=1e-12)
    w = pp.tukey_window(1024, 0.25)
    assert w[0] == 0.0 and w[512] == 1.0
    np.testing.assert_allclose(w, w[::-1])
    np.testing.assert_allclose(w, closed_form_tukey(1024, 0.25), atol=1e-12)
    with pytest.raises(ParameterError):
        pp.tukey_window(16, 1.5)


def test_power_spectrum_matches_direct_dft(rng):
    frame = rng.normal(size=1024)
    w = pp.tukey_window(1024)
    np.testing.assert_allclose(pp.power_spectrum(frame), direct_dft_psd(frame, w, 1000), rtol=1e-9,
                               atol=1e-15)
    assert not pp.power_spectrum(np.zeros(1024)).any()
    with pytest.raises(DimensionError):
        pp.power_spectrum(np.zeros(1000))


def test_sinusoid_energy_at_its_bin():
    n = np.arange(1024)
    p = pp.power_spectrum(np.sin(2 * np.pi * 64 * n / 1024))
    assert np.argmax(p) == 64
    # main lobe taken as bins within 2 of the peak (the window's first null is at 1.14 bins)
    outside = np.abs(np.arange(513) - 64) > 2
    assert p[outside].max() < 0.01 * p[64]


def test_parseval(rng):
    frame = rng.normal(size=1024)
    w = pp.tukey_window(1024)
    p = pp.power_spectrum(frame)
    lhs = p.sum() * 1000 / 1024
    assert lhs == pytest.approx(np.sum((w * frame) ** 2) / np.sum(w ** 2), rel=1e-6)


def test_filterbank_properties():
    fb = pp.filterbank_matrix()
    assert fb.shape == (64, 513)
    np.testing.assert_allclose(fb.sum(axis=1), 1.0)
    np.testing.assert_allclose(pp.filterbank_64(np.full(513, 3.7)), 3.7)
    assert not pp.filterbank_64(np.zeros(513)).any()
    for k in range(513):
        spike = np.zeros(513)
        spike[k] = 1.0
        assert np.count_nonzero(pp.filterbank_64(spike)) <= 2


def test_log_compress():
    assert pp.log_compress(0.0) == pytest.approx(np.log(1e-10))
    assert pp.log_compress(0.0) == pytest.approx(-23.0259, abs=1e-4)
    assert abs(pp.log_compress(1 - 1e-12)) < 1e-9
    x = np.array([0.5, 3.0, 200.0])
    np.testing.assert_allclose(pp.log_compress(10 * x) - pp.log_compress(x), np.log(10), rtol=1e-8)
    with pytest.raises(ParameterError):
        pp.log_compress([-1.0])


@pytest.mark.parametrize("cols,seconds", [(1, 1.024), (4, 2.56), (24, 12.8)])
def test_acquisition_time(cols, seconds):
    assert pp.acquisition_time(cols) == pytest.approx(seconds, abs=1e-12)


@pytest.mark.parametrize("n,cols", [(12_800, 24), (119_296, 232), (1023, 0), (1024, 1), (1535, 1)])
def test_column_count(n, cols):
    assert pp.n_columns(n) == cols


def test_spectrogram_shape(rng):
    assert pp.spectrogram(rng.normal(size=12_800)).shape == (24, 64)
    with pytest.raises(DimensionError):
        pp.spectrogram(np.zeros(100))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(1, 3000), min_size=1, max_size=12))
def test_streaming_is_chunk_invariant(sizes):
    x = np.random.default_rng(len(sizes)).normal(size=6000)
    stream = pp.SpectrogramStream()
    cols, pos = [], 0
    for size in sizes + [len(x)]:
        cols += stream.push(x[pos:pos + size])
        pos += size
    assert [c.index for c in cols] == list(range(len(cols)))
    assert [c.start_sample for c in cols] == [512 * i for i in range(len(cols))]
    np.testing.assert_array_equal(np.stack([c.values for c in cols]), pp.spectrogram(x))


def test_raw_round_trip(rng):
    ints = rng.integers(-(1 << 23), 1 << 23, 500)
    np.testing.assert_array_equal(pp.decode_raw(pp.encode_raw(ints, "s24"), "s24"), ints)
    f = rng.normal(size=100).astype(np.float32)
    np.testing.assert_array_equal(pp.decode_raw(pp.encode_raw(f)), f)
    with pytest.raises(FormatError):
        pp.decode_raw(b"\0" * 5, "s24")
    with pytest.raises(FormatError):
        pp.encode_raw([1 << 23], "s24")


def test_spectrogram_files(tmp_path, rng):
    spec = rng.normal(size=(8, 64)).astype(np.float32)
    for fmt in ("bin", "csv"):
        pp.write_spectrogram(spec, tmp_path / f"s.{fmt}", fmt)
        np.testing.assert_array_equal(pp.read_spectrogram(tmp_path / f"s.{fmt}"), spec)
    blob = pp.encode_spectrogram(spec)
    with pytest.raises(FormatError):
        pp.decode_spectrogram(blob[:-4])
    with pytest.raises(FormatError):
        pp.decode_spectrogram(b"NOPE" + blob[4:])
