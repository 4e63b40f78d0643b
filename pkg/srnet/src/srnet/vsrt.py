"""Reader/writer for the renderer's VSRT tensor files.

Wire format: magic "VSRT", version u8 (1), dtype u8 (0 = f32), ndim u8,
dims as u32 little-endian, row-major little-endian f32 payload.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np


class VsrtError(Exception):
    pass


def read_tensor(path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if blob[:4] != b"VSRT":
        raise VsrtError(f"{path}: not a VSRT file")
    version, dtype_code, ndim = struct.unpack("<BBB", blob[4:7])
    if version != 1 or dtype_code != 0:
        raise VsrtError(f"{path}: unsupported version/dtype {version}/{dtype_code}")
    head = 7 + 4 * ndim
    dims = struct.unpack(f"<{ndim}I", blob[7:head])
    n = int(np.prod(dims, dtype=np.int64)) if ndim else 1
    if len(blob) - head != 4 * n:
        raise VsrtError(f"{path}: payload size mismatch")
    return np.frombuffer(blob[head:], dtype="<f4").reshape(dims).astype(np.float32)


def write_tensor(path, arr) -> None:
    a = np.ascontiguousarray(np.asarray(arr, dtype="<f4"))
    with open(path, "wb") as f:
        f.write(b"VSRT")
        f.write(struct.pack("<BBB", 1, 0, a.ndim))
        f.write(struct.pack(f"<{a.ndim}I", *a.shape))
        f.write(a.tobytes())
