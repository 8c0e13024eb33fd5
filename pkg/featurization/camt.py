"""CAMT tensor container.

Little-endian layout: magic ``CAMT``, version u8 (=1), dtype u8 (1=f32, 2=f64),
rank u8, rank × u64 extents, then the row-major payload.
"""

from __future__ import annotations

import os
import pathlib
import struct

import numpy as np

from errors import BadMagicError, TensorFileError, TruncatedPayloadError, UnsupportedFormatError
from numeric.tensor import Tensor

MAGIC = b"CAMT"
VERSION = 1
MAX_RANK = 8

_DTYPE_CODES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_CODE_FOR_DTYPE = {np.dtype(np.float32): 1, np.dtype(np.float64): 2}
_HEADER = struct.Struct("<4sBBB")


def encode_tensor(array: np.ndarray) -> bytes:
    array = np.asarray(array)
    code = _CODE_FOR_DTYPE.get(array.dtype.newbyteorder("="))
    if code is None:
        raise UnsupportedFormatError(f"CAMT stores float32/float64 only, got {array.dtype}")
    if not 1 <= array.ndim <= MAX_RANK:
        raise UnsupportedFormatError(f"CAMT rank must be 1..{MAX_RANK}, got {array.ndim}")
    header = _HEADER.pack(MAGIC, VERSION, code, array.ndim)
    extents = struct.pack(f"<{array.ndim}Q", *array.shape)
    payload = np.ascontiguousarray(array, dtype=_DTYPE_CODES[code]).tobytes()
    return header + extents + payload


def decode_tensor(blob: bytes, source: str = "<bytes>") -> np.ndarray:
    if len(blob) < _HEADER.size:
        raise TruncatedPayloadError(f"{source}: header needs {_HEADER.size} bytes, got {len(blob)}")
    magic, version, code, rank = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise BadMagicError(f"{source}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise UnsupportedFormatError(f"{source}: unsupported CAMT version {version}")
    if code not in _DTYPE_CODES:
        raise UnsupportedFormatError(f"{source}: unknown dtype code {code}")
    if not 1 <= rank <= MAX_RANK:
        raise UnsupportedFormatError(f"{source}: rank {rank} outside 1..{MAX_RANK}")

    offset = _HEADER.size
    extents_size = 8 * rank
    if len(blob) < offset + extents_size:
        raise TruncatedPayloadError(f"{source}: extents truncated")
    shape = struct.unpack_from(f"<{rank}Q", blob, offset)
    if any(n == 0 for n in shape):
        raise UnsupportedFormatError(f"{source}: zero extent in shape {shape}")
    offset += extents_size

    dtype = _DTYPE_CODES[code]
    expected = int(np.prod(shape)) * dtype.itemsize
    available = len(blob) - offset
    if available < expected:
        raise TruncatedPayloadError(
            f"{source}: payload holds {available // dtype.itemsize} values, shape {shape} needs "
            f"{expected // dtype.itemsize}"
        )
    if available > expected:
        raise TensorFileError(f"{source}: {available - expected} trailing bytes after payload")
    data = np.frombuffer(blob, dtype=dtype, count=int(np.prod(shape)), offset=offset)
    return data.reshape(shape).astype(dtype.newbyteorder("="))


def write_tensor_file(path: str | os.PathLike, value: Tensor | np.ndarray) -> None:
    array = value.data if isinstance(value, Tensor) else value
    pathlib.Path(path).write_bytes(encode_tensor(array))


def read_tensor_file(path: str | os.PathLike) -> Tensor:
    array = decode_tensor(pathlib.Path(path).read_bytes(), source=str(path))
    return Tensor(array, dtype=array.dtype)
