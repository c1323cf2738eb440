"""Binary weight file.

Layout (all little-endian)::

    magic            8 bytes  b"CNAVLSTM"
    version          u32      FORMAT_VERSION
    hidden H         u32
    window l         u32
    input size       u32
    output size      u32
    velocity scale   f64      input velocity multiplier
    target scale     f64      output divisor
    W  (4H, in)      f64, row-major, gate blocks i, f, g, o
    U  (4H, H)       f64, row-major, gate blocks i, f, g, o
    b  (4H)          f64, gate blocks i, f, g, o
    fc_W (out, H)    f64, row-major
    fc_b (out)       f64
    crc32            u32      over every preceding byte
"""

from __future__ import annotations

import os
import struct
import zlib
from pathlib import Path

import numpy as np

from circumnav.neural.lstm import TENSOR_NAMES, LstmModel, LstmParams

MAGIC = b"CNAVLSTM"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sIIIIIdd")


class WeightFileError(OSError):
    """Unreadable, truncated or otherwise malformed weight file."""


class VersionMismatch(WeightFileError):
    pass


class ChecksumMismatch(WeightFileError):
    pass


def _shapes(H: int, n_in: int, n_out: int) -> dict[str, tuple[int, ...]]:
    return {
        "W": (4 * H, n_in),
        "U": (4 * H, H),
        "b": (4 * H,),
        "fc_W": (n_out, H),
        "fc_b": (n_out,),
    }


def to_bytes(model: LstmModel) -> bytes:
    p = model.params
    head = _HEADER.pack(
        MAGIC,
        FORMAT_VERSION,
        p.hidden_size,
        model.window,
        p.input_size,
        p.output_size,
        model.input_velocity_scale,
        model.target_scale,
    )
    body = b"".join(np.ascontiguousarray(t, dtype="<f8").tobytes() for t in p.tensors().values())
    data = head + body
    return data + struct.pack("<I", zlib.crc32(data))


def save_weights(model: LstmModel, path) -> Path:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(to_bytes(model))
    os.replace(tmp, path)
    return path


def _parse_header(data: bytes) -> dict:
    if len(data) < _HEADER.size:
        raise WeightFileError(f"file too short for header ({len(data)} bytes)")
    magic, version, H, window, n_in, n_out, vscale, tscale = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise WeightFileError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"weight file version {version}, this build reads {FORMAT_VERSION}")
    return dict(
        version=version,
        hidden=H,
        window=window,
        input_size=n_in,
        output_size=n_out,
        input_velocity_scale=vscale,
        target_scale=tscale,
    )


def from_bytes(data: bytes) -> LstmModel:
    hdr = _parse_header(data)
    shapes = _shapes(hdr["hidden"], hdr["input_size"], hdr["output_size"])
    n_floats = sum(int(np.prod(s)) for s in shapes.values())
    expected = _HEADER.size + 8 * n_floats + 4
    if len(data) != expected:
        raise WeightFileError(f"expected {expected} bytes, found {len(data)}")
    (crc,) = struct.unpack_from("<I", data, expected - 4)
    if crc != zlib.crc32(data[: expected - 4]):
        raise ChecksumMismatch("weight file checksum does not match its contents")
    offset = _HEADER.size
    tensors = {}
    for name in TENSOR_NAMES:
        shape = shapes[name]
        n = int(np.prod(shape))
        tensors[name] = np.frombuffer(data, dtype="<f8", count=n, offset=offset).astype(float).reshape(shape)
        offset += 8 * n
    return LstmModel(
        LstmParams(**tensors),
        hdr["window"],
        hdr["input_velocity_scale"],
        hdr["target_scale"],
    )


def load_weights(path) -> LstmModel:
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise WeightFileError(f"cannot read weights {path}: {e}") from e
    return from_bytes(data)


def read_header(path) -> dict:
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise WeightFileError(f"cannot read weights {path}: {e}") from e
    hdr = _parse_header(data)
    hdr["bytes"] = len(data)
    return hdr
