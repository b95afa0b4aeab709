"""IDX container (MNIST layout).

    00 00 <type> <rank> | rank x big-endian u32 dims | payload

Only the unsigned-byte type (0x08) is supported. Rank-1 files are label vectors
and are returned as integers; image tensors are scaled to [0, 1].
"""

import os
import struct
from pathlib import Path

import numpy as np

from src.application.common.errors import IdxMagicError, IdxTruncatedError, IdxTypeError

UBYTE = 0x08


def parse_idx(raw: bytes, scale: bool = True) -> np.ndarray:
    if len(raw) < 4:
        raise IdxTruncatedError(4, len(raw))
    if raw[0] != 0 or raw[1] != 0:
        raise IdxMagicError(f"bad magic bytes {raw[:2].hex()}, expected 0000")
    if raw[2] != UBYTE:
        raise IdxTypeError(f"unsupported element type 0x{raw[2]:02x}")
    rank = raw[3]
    header = 4 + 4 * rank
    if len(raw) < header:
        raise IdxTruncatedError(header, len(raw))
    dims = struct.unpack(f">{rank}I", raw[4:header]) if rank else ()
    expected = header + int(np.prod(dims, dtype=np.int64))
    if len(raw) < expected:
        raise IdxTruncatedError(expected, len(raw))

    data = np.frombuffer(raw, dtype=np.uint8, count=expected - header, offset=header).reshape(dims)
    if rank == 1 or not scale:
        return data.astype(np.int64)
    return data.astype(np.float64) / 255.0


def load_idx(path: str | os.PathLike, scale: bool = True) -> np.ndarray:
    return parse_idx(Path(path).read_bytes(), scale=scale)


def write_idx(path: str | os.PathLike, array: np.ndarray):
    """Write a uint8 tensor (or [0,1] floats, rescaled to bytes)."""
    array = np.asarray(array)
    if array.dtype.kind == "f":
        array = np.rint(np.clip(array, 0.0, 1.0) * 255.0)
    array = array.astype(np.uint8)
    header = bytes([0, 0, UBYTE, array.ndim]) + struct.pack(f">{array.ndim}I", *array.shape)
    Path(path).write_bytes(header + array.tobytes(order="C"))
