"""
Self-describing binary array container (".milt" files)

Layout, all integers little-endian:

    magic       4 bytes  b"MILT"
    version     1 byte   1
    dtype_code  1 byte   1=float32, 2=int64, 3=uint8 (booleans are stored as 0/1)
    ndim        1 byte
    shape       ndim × uint64
    payload     row-major element data
"""

import os
import struct
from typing import Tuple, Union

import numpy as np

from milkit.exceptions import ArrayFileError

MAGIC = b"MILT"
VERSION = 1
PREAMBLE = struct.Struct("<4sBBB")

DTYPES = {
    1: np.dtype("<f4"),
    2: np.dtype("<i8"),
    3: np.dtype("u1"),
}
CODES = {np.dtype(np.float32): 1, np.dtype(np.int64): 2, np.dtype(np.uint8): 3, np.dtype(bool): 3}

PathLike = Union[str, os.PathLike]


def header_size(ndim: int) -> int:
    return PREAMBLE.size + 8 * ndim


def encode_array(array: np.ndarray) -> bytes:
    """Serialize an array to the container format"""
    array = np.asarray(array)
    code = CODES.get(array.dtype)
    if code is None:
        raise ArrayFileError(f"unsupported dtype {array.dtype}, expected float32, int64, uint8 or bool")
    if code == 1 and not np.isfinite(array).all():
        raise ArrayFileError("array contains NaN or Inf")
    if array.ndim > 255:
        raise ArrayFileError(f"too many dimensions: {array.ndim}")

    header = PREAMBLE.pack(MAGIC, VERSION, code, array.ndim)
    header += struct.pack(f"<{array.ndim}Q", *array.shape)
    payload = np.ascontiguousarray(array.astype(DTYPES[code], copy=False)).tobytes(order="C")
    return header + payload


def _decode_header(data: bytes) -> Tuple[np.dtype, Tuple[int, ...], int]:
    if len(data) < PREAMBLE.size:
        raise ArrayFileError("unrecognized array file: header too short")
    magic, version, code, ndim = PREAMBLE.unpack_from(data)
    if magic != MAGIC or version != VERSION or code not in DTYPES:
        raise ArrayFileError(
            f"unrecognized array file: magic={magic!r} version={version} dtype_code={code}"
        )
    offset = header_size(ndim)
    if len(data) < offset:
        raise ArrayFileError("corrupt array file: truncated shape")
    shape = struct.unpack_from(f"<{ndim}Q", data, PREAMBLE.size)
    return DTYPES[code], tuple(int(s) for s in shape), offset


def decode_array(data: bytes) -> np.ndarray:
    """Deserialize bytes produced by ``encode_array``"""
    dtype, shape, offset = _decode_header(data)
    expected = dtype.itemsize * int(np.prod(shape, dtype=np.int64))
    actual = len(data) - offset
    if actual != expected:
        raise ArrayFileError(f"corrupt array file: payload has {actual} bytes, expected {expected}")
    if expected == 0:
        return np.zeros(shape, dtype=dtype.newbyteorder("="))
    array = np.frombuffer(data, dtype=dtype, offset=offset).reshape(shape)
    # native byte order, writable copy
    return array.astype(dtype.newbyteorder("="))


def write_array(array: np.ndarray, path: PathLike) -> None:
    data = encode_array(array)
    with open(path, "wb") as f:
        f.write(data)


def read_array(path: PathLike) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    return decode_array(data)


def read_shape(path: PathLike) -> Tuple[int, ...]:
    """Read only the header of an array file and return its shape"""
    with open(path, "rb") as f:
        preamble = f.read(PREAMBLE.size)
        ndim = preamble[-1] if len(preamble) == PREAMBLE.size else 0
        data = preamble + f.read(8 * ndim)
    return _decode_header(data)[1]
