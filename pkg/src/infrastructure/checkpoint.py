"""Binary checkpoint container.

    b"NEUS" | u32 version | tensor* until end of file

    tensor := u32 name_length | utf-8 name | u32 rank | rank x u32 dims | f64 payload

All integers and the payload are little-endian; payloads are row-major.
"""

import hashlib
import os
import struct
from pathlib import Path

import numpy as np

from src.application.common.errors import CheckpointFormatError
from src.infrastructure.artifacts import write_bytes_atomic

MAGIC = b"NEUS"
FORMAT_VERSION = 1


def encode_checkpoint(tensors: dict[str, np.ndarray]) -> bytes:
    parts = [MAGIC, struct.pack("<I", FORMAT_VERSION)]
    for name, value in tensors.items():
        arr = np.asarray(value, dtype="<f8").copy(order="C")
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<I", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
        parts.append(arr.tobytes(order="C"))
    return b"".join(parts)


def decode_checkpoint(raw: bytes) -> dict[str, np.ndarray]:
    if raw[:4] != MAGIC:
        raise CheckpointFormatError(f"bad magic {raw[:4]!r}, expected {MAGIC!r}")
    if len(raw) < 8:
        raise CheckpointFormatError("missing format version")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != FORMAT_VERSION:
        raise CheckpointFormatError(f"unsupported checkpoint version {version}")

    tensors: dict[str, np.ndarray] = {}
    offset = 8
    try:
        while offset < len(raw):
            (name_len,) = struct.unpack_from("<I", raw, offset)
            offset += 4
            name = raw[offset:offset + name_len].decode("utf-8")
            if len(name.encode("utf-8")) != name_len:
                raise CheckpointFormatError("truncated tensor name")
            offset += name_len
            (rank,) = struct.unpack_from("<I", raw, offset)
            offset += 4
            dims = struct.unpack_from(f"<{rank}I", raw, offset)
            offset += 4 * rank
            count = int(np.prod(dims, dtype=np.int64))
            end = offset + 8 * count
            if end > len(raw):
                raise CheckpointFormatError(f"tensor '{name}' truncated: need {end - offset} bytes")
            tensors[name] = np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(dims).astype(np.float64)
            offset = end
    except (struct.error, UnicodeDecodeError) as exc:
        raise CheckpointFormatError(f"corrupt checkpoint at byte {offset}: {exc}") from exc
    return tensors


def save_checkpoint(path: str | os.PathLike, tensors: dict[str, np.ndarray]) -> Path:
    return write_bytes_atomic(path, encode_checkpoint(tensors))


def load_checkpoint(path: str | os.PathLike) -> dict[str, np.ndarray]:
    return decode_checkpoint(Path(path).read_bytes())


def checkpoint_digest(path: str | os.PathLike) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
