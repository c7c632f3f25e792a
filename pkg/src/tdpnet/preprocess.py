"""Raw seismic samples to log-compressed 64-bin spectrogram columns.

Pipeline per frame: Tukey window, real FFT, one-sided power spectral density,
64 triangular filters, natural log.  Frames are 1024 samples with a hop of 512.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np
from scipy.signal.windows import tukey

from .exceptions import DimensionError, FormatError, ParameterError
from .tensor import DTYPE

SAMPLE_RATE = 1000
FRAME_SIZE = 1024
HOP = 512
N_BINS = 64
TUKEY_ALPHA = 0.25
LOG_EPS = 1e-10

SPEC_MAGIC = b"TDPS"
SPEC_VERSION = 1


def tukey_window(n: int, alpha: float = TUKEY_ALPHA) -> np.ndarray:
    """Symmetric tapered-cosine window; ``alpha=0`` is rectangular, ``alpha=1`` is Hann."""
    if n < 2:
        raise ParameterError(f"window length must be >= 2, got {n}")
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError(f"alpha must lie in [0, 1], got {alpha}")
    return tukey(n, alpha, sym=True)


def power_spectrum(frame, sample_rate: float = SAMPLE_RATE, window=None) -> np.ndarray:
    """One-sided power spectral density of one windowed frame.

    Squared FFT magnitudes are scaled by ``1 / (fs * sum(w**2))``; bins other
    than DC and Nyquist are doubled.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape != (FRAME_SIZE,):
        raise DimensionError(f"frame must have {FRAME_SIZE} samples, got shape {frame.shape}")
    if window is None:
        window = _default_window()
    spec = np.fft.rfft(frame * window)
    power = (spec.real ** 2 + spec.imag ** 2) / (sample_rate * np.sum(window ** 2))
    power[1:-1] *= 2.0
    return power


def filterbank_matrix(n_fft_bins: int = FRAME_SIZE // 2 + 1, n_bins: int = N_BINS) -> np.ndarray:
    """``(n_bins, n_fft_bins)`` triangular filters with unit row sums.

    Centres are linearly spaced from bin 1 to the last bin; each triangle
    reaches zero at its neighbours' centres, so adjacent filters overlap by half.
    """
    centres = np.linspace(1.0, n_fft_bins - 1, n_bins)
    spacing = centres[1] - centres[0]
    k = np.arange(n_fft_bins)
    fb = np.maximum(0.0, 1.0 - np.abs(k[None, :] - centres[:, None]) / spacing)
    return fb / fb.sum(axis=1, keepdims=True)


_FILTERBANK = filterbank_matrix()
_WINDOW = tukey_window(FRAME_SIZE, TUKEY_ALPHA)
_WINDOW.setflags(write=False)


def _default_window() -> np.ndarray:
    return _WINDOW


def filterbank_64(spectrum) -> np.ndarray:
    spectrum = np.asarray(spectrum, dtype=np.float64)
    if spectrum.shape[-1] != _FILTERBANK.shape[1]:
        raise DimensionError(f"spectrum must have {_FILTERBANK.shape[1]} bins, got {spectrum.shape}")
    return spectrum @ _FILTERBANK.T


def log_compress(energies, eps: float = LOG_EPS) -> np.ndarray:
    energies = np.asarray(energies, dtype=np.float64)
    if np.any(energies < 0):
        raise ParameterError("energies must be non-negative")
    return np.log(energies + eps)


def spectrogram_column(frame, sample_rate: float = SAMPLE_RATE) -> np.ndarray:
    return log_compress(filterbank_64(power_spectrum(frame, sample_rate))).astype(DTYPE)


def acquisition_time(columns: int, sample_rate: float = SAMPLE_RATE,
                     frame_size: int = FRAME_SIZE, hop: int = HOP) -> float:
    """Seconds of signal needed to produce ``columns`` spectrogram columns."""
    if columns < 1:
        raise ParameterError("columns must be >= 1")
    return (frame_size + (columns - 1) * hop) / sample_rate


def n_columns(n_samples: int, frame_size: int = FRAME_SIZE, hop: int = HOP) -> int:
    return 0 if n_samples < frame_size else (n_samples - frame_size) // hop + 1


@dataclass
class SpectrogramColumn:
    values: np.ndarray
    index: int
    start_sample: int


class Segmenter:
    """Cuts a sample stream into overlapping frames using a ``2N`` double buffer.

    Feed arbitrary chunks with :meth:`push`; every complete frame is yielded
    once, regardless of how the stream was chunked.
    """

    def __init__(self, frame_size: int = FRAME_SIZE, hop: int = HOP):
        self.frame_size = frame_size
        self.hop = hop
        self._buf = np.zeros(2 * frame_size, np.float64)
        self._fill = 0
        self.frames_emitted = 0

    def push(self, samples) -> Iterator[tuple[int, int, np.ndarray]]:
        """Yield ``(frame index, start sample, frame)`` for each completed frame."""
        samples = np.asarray(samples, dtype=np.float64).reshape(-1)
        pos = 0
        while pos < len(samples):
            take = min(len(self._buf) - self._fill, len(samples) - pos)
            self._buf[self._fill:self._fill + take] = samples[pos:pos + take]
            self._fill += take
            pos += take
            while self._fill >= self.frame_size:
                frame = self._buf[:self.frame_size].copy()
                idx = self.frames_emitted
                self.frames_emitted += 1
                yield idx, idx * self.hop, frame
                self._buf[:self._fill - self.hop] = self._buf[self.hop:self._fill]
                self._fill -= self.hop


class SpectrogramStream:
    """Incremental spectrogram: samples in, :class:`SpectrogramColumn` out."""

    def __init__(self, sample_rate: float = SAMPLE_RATE):
        self.sample_rate = sample_rate
        self.segmenter = Segmenter()

    def push(self, samples) -> list[SpectrogramColumn]:
        return [SpectrogramColumn(spectrogram_column(frame, self.sample_rate), idx, start)
                for idx, start, frame in self.segmenter.push(samples)]


def spectrogram(samples, sample_rate: float = SAMPLE_RATE) -> np.ndarray:
    """``(T, 64)`` float32 spectrogram of a whole signal."""
    samples = np.asarray(samples, dtype=np.float64).reshape(-1)
    t = n_columns(len(samples))
    if t == 0:
        raise DimensionError(f"need at least {FRAME_SIZE} samples, got {len(samples)}")
    starts = HOP * np.arange(t)
    return np.stack([spectrogram_column(samples[i:i + FRAME_SIZE], sample_rate) for i in starts])


# raw sample files -----------------------------------------------------------

def read_raw(path, fmt: str = "f32") -> np.ndarray:
    """Read headerless little-endian samples: ``f32`` floats or ``s24`` signed ints."""
    data = Path(path).read_bytes()
    return decode_raw(data, fmt)


def decode_raw(data: bytes, fmt: str = "f32") -> np.ndarray:
    if fmt == "f32":
        if len(data) % 4:
            raise FormatError(f"f32 stream length {len(data)} is not a multiple of 4")
        return np.frombuffer(data, "<f4").astype(np.float64)
    if fmt == "s24":
        if len(data) % 3:
            raise FormatError(f"s24 stream length {len(data)} is not a multiple of 3")
        b = np.frombuffer(data, np.uint8).reshape(-1, 3).astype(np.int32)
        v = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        v = np.where(v >= 1 << 23, v - (1 << 24), v)
        return v.astype(np.float64)
    raise FormatError(f"unknown raw format {fmt!r}")


def encode_raw(samples, fmt: str = "f32") -> bytes:
    samples = np.asarray(samples)
    if fmt == "f32":
        return samples.astype("<f4").tobytes()
    if fmt == "s24":
        v = np.asarray(np.round(samples), dtype=np.int64)
        if np.any((v < -(1 << 23)) | (v >= 1 << 23)):
            raise FormatError("sample outside the 24-bit range")
        v = v & 0xFFFFFF
        b = np.stack([v & 0xFF, (v >> 8) & 0xFF, (v >> 16) & 0xFF], axis=1).astype(np.uint8)
        return b.tobytes()
    raise FormatError(f"unknown raw format {fmt!r}")


# spectrogram files ----------------------------------------------------------

def encode_spectrogram(spec) -> bytes:
    """16-byte header (magic, u32 version, u32 T, u32 F) then float32 values."""
    spec = np.asarray(spec, dtype=DTYPE)
    t, f = spec.shape
    return struct.pack("<4sIII", SPEC_MAGIC, SPEC_VERSION, t, f) + spec.astype("<f4").tobytes()


def decode_spectrogram(data: bytes) -> np.ndarray:
    if len(data) < 16:
        raise FormatError("spectrogram file shorter than its header")
    magic, version, t, f = struct.unpack("<4sIII", data[:16])
    if magic != SPEC_MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != SPEC_VERSION:
        raise FormatError(f"unsupported spectrogram version {version}")
    if len(data) != 16 + 4 * t * f:
        raise FormatError(f"payload is {len(data) - 16} bytes, header promises {4 * t * f}")
    return np.frombuffer(data[16:], "<f4").reshape(t, f).astype(DTYPE)


def write_spectrogram(spec, path, fmt: str = "bin") -> None:
    path = Path(path)
    if fmt == "bin":
        path.write_bytes(encode_spectrogram(spec))
    elif fmt == "csv":
        np.savetxt(path, np.asarray(spec, dtype=DTYPE), delimiter=",", fmt="%.9g")
    else:
        raise FormatError(f"unknown spectrogram format {fmt!r}")


def read_spectrogram(path) -> np.ndarray:
    path = Path(path)
    data = path.read_bytes()
    if data[:4] == SPEC_MAGIC:
        return decode_spectrogram(data)
    try:
        spec = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise FormatError(f"{path}: not a spectrogram file ({exc})") from exc
    if spec.size == 0:
        raise FormatError(f"{path}: empty spectrogram")
    return spec.astype(DTYPE)
