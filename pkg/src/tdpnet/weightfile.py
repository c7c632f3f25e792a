"""Binary weight container (``.tdpw``).

All integers little-endian::

    header   magic b"TDPW" | u16 version | u16 layer count | u16 T | u16 F | u16 C
    layer    u8 name length | name (ASCII) | u8 kind | u16 kt | u16 kf
             | u16 stride_t | u16 stride_f | u16 c_in | u16 c_out
             | u8 activation | u8 dtype tag
    dtype 0  (float32) weights (kt*kf*c_in*c_out f32, order kt,kf,c_in,c_out) | bias (c_out f32)
    dtype 1  (pow2 int8) i8 n1 | i8 n2 | weight codes (u8) | bias codes (u8)
    dtype 255 no payload (dropout and pooling layers)

Every layer of the network is recorded, so the file embeds its own network
description.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .exceptions import FormatError
from .network import LAYER_KINDS, LayerSpec, NetworkSpec, WeightStore
from .quantize import Pow2Codebook, QuantizedLayer
from .tensor import ACTIVATIONS, ConvKernel

MAGIC = b"TDPW"
VERSION = 1
DTYPE_FLOAT32 = 0
DTYPE_POW2 = 1
DTYPE_NONE = 255
_ACTIVATIONS = tuple(ACTIVATIONS)
_HEADER = struct.Struct("<4sHHHHH")
_LAYER = struct.Struct("<BHHHHHHBB")


def encode_weights(store: WeightStore) -> bytes:
    net = store.network
    out = [_HEADER.pack(MAGIC, VERSION, len(net.layers), net.input_t, net.input_f, net.input_c)]
    for layer in net.layers:
        name = layer.name.encode("ascii")
        param = store.layers.get(layer.name)
        if param is None:
            tag = DTYPE_NONE
        elif isinstance(param, ConvKernel):
            tag = DTYPE_FLOAT32
        else:
            tag = DTYPE_POW2
        out.append(struct.pack("<B", len(name)) + name)
        out.append(_LAYER.pack(LAYER_KINDS.index(layer.kind), layer.kt, layer.kf, layer.stride_t,
                               layer.stride_f, layer.c_in, layer.c_out,
                               _ACTIVATIONS.index(layer.activation), tag))
        if tag == DTYPE_FLOAT32:
            out.append(param.weights.astype("<f4").tobytes())
            out.append(param.bias.astype("<f4").tobytes())
        elif tag == DTYPE_POW2:
            book = param.codebook
            if not (-128 <= book.n1 and book.n2 <= 127):
                raise FormatError(f"{layer.name}: exponent range {book} does not fit int8")
            out.append(struct.pack("<bb", book.n1, book.n2))
            out.append(param.weight_codes.astype(np.uint8).tobytes())
            out.append(param.bias_codes.astype(np.uint8).tobytes())
    return b"".join(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(f"truncated payload at byte {self.pos}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: struct.Struct):
        return fmt.unpack(self.take(fmt.size))


def decode_weights(data: bytes) -> WeightStore:
    r = _Reader(data)
    magic, version, count, t, f, c = r.unpack(_HEADER)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported container version {version}")
    layers, params = [], {}
    for _ in range(count):
        (n,) = struct.unpack("<B", r.take(1))
        try:
            name = r.take(n).decode("ascii")
        except UnicodeDecodeError as exc:
            raise FormatError("layer name is not ASCII") from exc
        kind, kt, kf, st, sf, cin, cout, act, tag = r.unpack(_LAYER)
        if kind >= len(LAYER_KINDS) or act >= len(_ACTIVATIONS):
            raise FormatError(f"{name}: bad layer kind or activation code")
        try:
            spec = LayerSpec(name, LAYER_KINDS[kind], kt, kf, st, sf, cin, cout, _ACTIVATIONS[act])
        except ValueError as exc:
            raise FormatError(str(exc)) from exc
        layers.append(spec)
        shape = (kt, kf, cin, cout)
        nw = kt * kf * cin * cout
        if tag == DTYPE_FLOAT32:
            w = np.frombuffer(r.take(4 * nw), "<f4").reshape(shape)
            b = np.frombuffer(r.take(4 * cout), "<f4")
            params[name] = ConvKernel(w.astype(np.float32), b.astype(np.float32))
        elif tag == DTYPE_POW2:
            n1, n2 = struct.unpack("<bb", r.take(2))
            try:
                book = Pow2Codebook(n1, n2)
            except ValueError as exc:
                raise FormatError(str(exc)) from exc
            wc = np.frombuffer(r.take(nw), np.uint8).reshape(shape).copy()
            bc = np.frombuffer(r.take(cout), np.uint8).copy()
            book.decode(wc)
            book.decode(bc)
            params[name] = QuantizedLayer(wc, bc, book)
        elif tag != DTYPE_NONE:
            raise FormatError(f"{name}: unknown dtype tag {tag}")
    if r.pos != len(data):
        raise FormatError(f"{len(data) - r.pos} trailing bytes after last layer")
    try:
        net = NetworkSpec(tuple(layers), t, f, c)
        return WeightStore(net, params)
    except ValueError as exc:
        raise FormatError(f"embedded network is inconsistent: {exc}") from exc


def save_weights(store: WeightStore, path) -> None:
    Path(path).write_bytes(encode_weights(store))


def load_weights(path) -> WeightStore:
    return decode_weights(Path(path).read_bytes())


def header_bytes(store: WeightStore) -> int:
    """Size of everything in the container except the raw parameter payload."""
    return len(encode_weights(store)) - store.payload_bytes()
