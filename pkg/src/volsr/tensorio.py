"""VSRT binary tensor files: magic "VSRT", version u8, dtype u8 (0 = f32),
ndim u8, dims as u32 little-endian, then the row-major little-endian payload."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"VSRT"
VERSION = 1
DTYPE_F32 = 0


def write_tensor(path, arr: np.ndarray) -> None:
    a = np.ascontiguousarray(np.asarray(arr, dtype="<f4"))
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<BBB", VERSION, DTYPE_F32, a.ndim))
        f.write(struct.pack(f"<{a.ndim}I", *a.shape))
        f.write(a.tobytes())


def read_tensor(path) -> np.ndarray:
    path = Path(path)
    blob = path.read_bytes()
    if blob[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}")
    if len(blob) < 7:
        raise FormatError(f"{path}: truncated header")
    version, dtype_code, ndim = struct.unpack("<BBB", blob[4:7])
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if dtype_code != DTYPE_F32:
        raise FormatError(f"{path}: unsupported dtype code {dtype_code}")
    head = 7 + 4 * ndim
    if len(blob) < head:
        raise FormatError(f"{path}: truncated dims")
    dims = struct.unpack(f"<{ndim}I", blob[7:head])
    n = int(np.prod(dims, dtype=np.int64)) if ndim else 1
    payload = blob[head:]
    if len(payload) != 4 * n:
        raise FormatError(
            f"{path}: payload {len(payload)} bytes, dims {dims} imply {4 * n}")
    return np.frombuffer(payload, dtype="<f4").reshape(dims).astype(np.float32)
