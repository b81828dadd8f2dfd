"""Binary tensor files: u32 rank, u32 dims, then float64 values, little-endian."""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from ..exceptions import FormatError


def tensor_to_bytes(arr) -> bytes:
    arr = np.ascontiguousarray(np.asarray(arr, dtype="<f8"))
    header = struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape)
    return header + arr.tobytes(order="C")


def tensor_from_bytes(buf: bytes) -> np.ndarray:
    if len(buf) < 4:
        raise FormatError("tensor file truncated before rank")
    (rank,) = struct.unpack_from("<I", buf, 0)
    offset = 4 + 4 * rank
    if len(buf) < offset:
        raise FormatError("tensor file truncated inside shape header")
    shape = struct.unpack_from(f"<{rank}I", buf, 4)
    count = int(np.prod(shape, dtype=np.int64))
    if len(buf) != offset + 8 * count:
        raise FormatError(
            f"tensor payload is {len(buf) - offset} bytes, shape {shape} needs {8 * count}"
        )
    return np.frombuffer(buf, dtype="<f8", offset=offset).reshape(shape).astype(np.float64)


def save_tensor(path, arr) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(tensor_to_bytes(arr))
    os.replace(tmp, path)


def load_tensor(path) -> np.ndarray:
    return tensor_from_bytes(Path(path).read_bytes())
