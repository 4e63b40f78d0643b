"""Scalar volume data model: loading, sampling, gradients, transfer functions.

Conventions: voxel (i,j,k) sits at world position origin + (i*sx, j*sy, k*sz).
The volume's box is the hull of voxel centers, [origin, origin + (dims-1)*spacing];
samples outside it are vacuum (0.0). Payload files are little-endian, x-fastest.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .errors import DataError, FormatError, UsageError

_DTYPES = {"u8": np.dtype("u1"), "u16": np.dtype("<u2"), "f32": np.dtype("<f4")}


@dataclass(frozen=True)
class ScalarVolume:
    """3D scalar intensity grid, values in [0,1]. Immutable after construction."""

    dims: tuple[int, int, int]          # (nx, ny, nz)
    spacing: tuple[float, float, float]  # world units per voxel
    origin: tuple[float, float, float]   # world position of voxel (0,0,0)
    data: np.ndarray = field(repr=False)  # float32, shape (nx, ny, nz), indexed [x,y,z]

    def __post_init__(self):
        nx, ny, nz = self.dims
        if min(nx, ny, nz) < 2:
            raise UsageError(f"volume dims must be >= 2 per axis, got {self.dims}")
        if self.data.shape != (nx, ny, nz):
            raise FormatError(f"data shape {self.data.shape} != dims {self.dims}")
        if self.data.dtype != np.float32:
            raise FormatError(f"volume data must be float32, got {self.data.dtype}")
        if np.isnan(self.data).any():
            raise DataError("volume contains NaN")
        lo, hi = float(self.data.min()), float(self.data.max())
        if lo < 0.0 or hi > 1.0:
            raise DataError(f"intensities outside [0,1]: min={lo}, max={hi}")
        if not self.data.flags.c_contiguous:
            object.__setattr__(self, "data", np.ascontiguousarray(self.data))
        object.__setattr__(self, "data", _readonly(self.data))

    @property
    def bbox_min(self) -> np.ndarray:
        return np.asarray(self.origin, dtype=np.float64)

    @property
    def bbox_max(self) -> np.ndarray:
        d = np.asarray(self.dims, dtype=np.float64) - 1.0
        return self.bbox_min + d * np.asarray(self.spacing, dtype=np.float64)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.bbox_min + self.bbox_max)

    @property
    def bounding_sphere_radius(self) -> float:
        return float(np.linalg.norm(self.bbox_max - self.center))


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class TransferFunction:
    """Piecewise-linear intensity -> RGBA map given as ordered control points."""

    entries: tuple  # ((intensity, (r, g, b, a)), ...)

    def __post_init__(self):
        ent = tuple((float(i), tuple(float(c) for c in rgba)) for i, rgba in self.entries)
        if len(ent) < 2:
            raise UsageError("transfer function needs at least 2 control points")
        xs = [i for i, _ in ent]
        if xs[0] != 0.0 or xs[-1] != 1.0:
            raise UsageError("transfer function must span [0,1] (first node 0.0, last 1.0)")
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise UsageError("control point intensities must be strictly increasing")
        for _, rgba in ent:
            if len(rgba) != 4 or any(c < 0.0 or c > 1.0 for c in rgba):
                raise UsageError(f"rgba components must be in [0,1], got {rgba}")
        object.__setattr__(self, "entries", ent)

    def rasterize(self, n: int = 256) -> np.ndarray:
        """Dense (n,4) float64 lookup table sampled at k/(n-1)."""
        xs = np.linspace(0.0, 1.0, n)
        return tf_lookup(self, xs)


def tf_lookup(tf: TransferFunction, intensity) -> np.ndarray:
    """Exact piecewise-linear RGBA at the given intensity (scalar or array)."""
    xs = np.array([i for i, _ in tf.entries], dtype=np.float64)
    ys = np.array([rgba for _, rgba in tf.entries], dtype=np.float64)
    q = np.asarray(intensity, dtype=np.float64)
    out = np.stack([np.interp(q, xs, ys[:, c]) for c in range(4)], axis=-1)
    return out if q.ndim else out.reshape(4)


# ---------------------------------------------------------------------------
# Sampling kernels. Index-space variants are reused by the ray-march kernel.


@njit(cache=True)
def _sample_index(data, fx, fy, fz):
    """Trilinear sample at continuous index coords; 0.0 outside [0, n-1]^3."""
    nx, ny, nz = data.shape
    if fx < 0.0 or fy < 0.0 or fz < 0.0 or fx > nx - 1 or fy > ny - 1 or fz > nz - 1:
        return 0.0
    # coords are non-negative here, so int() truncation equals floor()
    i0 = int(fx)
    j0 = int(fy)
    k0 = int(fz)
    if i0 > nx - 2:
        i0 = nx - 2
    if j0 > ny - 2:
        j0 = ny - 2
    if k0 > nz - 2:
        k0 = nz - 2
    tx = fx - i0
    ty = fy - j0
    tz = fz - k0
    c000 = data[i0, j0, k0]
    c100 = data[i0 + 1, j0, k0]
    c010 = data[i0, j0 + 1, k0]
    c110 = data[i0 + 1, j0 + 1, k0]
    c001 = data[i0, j0, k0 + 1]
    c101 = data[i0 + 1, j0, k0 + 1]
    c011 = data[i0, j0 + 1, k0 + 1]
    c111 = data[i0 + 1, j0 + 1, k0 + 1]
    c00 = c000 + (c100 - c000) * tx
    c10 = c010 + (c110 - c010) * tx
    c01 = c001 + (c101 - c001) * tx
    c11 = c011 + (c111 - c011) * tx
    c0 = c00 + (c10 - c00) * ty
    c1 = c01 + (c11 - c01) * ty
    return c0 + (c1 - c0) * tz


@njit(cache=True)
def _gradient_index(data, fx, fy, fz, sx, sy, sz):
    """Central-difference gradient in intensity per world unit (h = spacing/2)."""
    gx = (_sample_index(data, fx + 0.5, fy, fz) - _sample_index(data, fx - 0.5, fy, fz)) / sx
    gy = (_sample_index(data, fx, fy + 0.5, fz) - _sample_index(data, fx, fy - 0.5, fz)) / sy
    gz = (_sample_index(data, fx, fy, fz + 0.5) - _sample_index(data, fx, fy, fz - 0.5)) / sz
    return gx, gy, gz


def _to_index(v: ScalarVolume, p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    o = np.asarray(v.origin, dtype=np.float64)
    s = np.asarray(v.spacing, dtype=np.float64)
    return (p - o) / s


def sample_trilinear(v: ScalarVolume, p) -> float | np.ndarray:
    """Trilinear interpolation at world position(s) p; 0.0 outside the volume box.

    p is a (3,) position or an (N,3) batch.
    """
    f = np.atleast_2d(_to_index(v, p))
    out = np.empty(f.shape[0], dtype=np.float64)
    for n in range(f.shape[0]):
        out[n] = _sample_index(v.data, f[n, 0], f[n, 1], f[n, 2])
    return float(out[0]) if np.asarray(p).ndim == 1 else out


def gradient_central_diff(v: ScalarVolume, p) -> np.ndarray:
    """Central-difference intensity gradient (per world unit) at world position(s) p."""
    f = np.atleast_2d(_to_index(v, p))
    sx, sy, sz = (float(s) for s in v.spacing)
    out = np.empty((f.shape[0], 3), dtype=np.float64)
    for n in range(f.shape[0]):
        out[n] = _gradient_index(v.data, f[n, 0], f[n, 1], f[n, 2], sx, sy, sz)
    return out[0] if np.asarray(p).ndim == 1 else out


# ---------------------------------------------------------------------------
# File I/O. Header JSON + separate raw payload (external interface).


def load_volume(path, header: dict | None = None) -> ScalarVolume:
    """Load a volume from its JSON header file (or a raw payload + header dict).

    Intensities are rescaled to [0,1] by min-max of the header's value_range,
    so transfer functions stay transferable across volumes of one modality.
    """
    path = Path(path)
    if header is None:
        try:
            header = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise FormatError(f"bad volume header {path}: {e}") from e
        payload_path = path.parent / header.get("data_file", path.stem + ".raw")
    else:
        payload_path = path

    for key in ("dims", "dtype", "value_range"):
        if key not in header:
            raise FormatError(f"volume header missing '{key}'")
    dims = tuple(int(d) for d in header["dims"])
    if len(dims) != 3 or min(dims) < 2:
        raise FormatError(f"bad dims in header: {header['dims']}")
    if header["dtype"] not in _DTYPES:
        raise FormatError(f"unsupported dtype '{header['dtype']}'")
    dt = _DTYPES[header["dtype"]]
    lo, hi = (float(x) for x in header["value_range"])
    if not hi > lo:
        raise FormatError(f"bad value_range {header['value_range']}")

    raw = np.fromfile(payload_path, dtype=dt)
    nx, ny, nz = dims
    if raw.size != nx * ny * nz:
        raise FormatError(
            f"payload has {raw.size} values, header dims imply {nx * ny * nz}"
        )
    raw = raw.astype(np.float64)
    if np.isnan(raw).any():
        raise DataError(f"NaN values in payload {payload_path}")
    data = np.clip((raw - lo) / (hi - lo), 0.0, 1.0).astype(np.float32)
    # x-fastest payload -> [x,y,z] indexing
    data = np.ascontiguousarray(data.reshape(nz, ny, nx).transpose(2, 1, 0))
    return ScalarVolume(
        dims=dims,
        spacing=tuple(float(s) for s in header.get("spacing", (1.0, 1.0, 1.0))),
        origin=tuple(float(o) for o in header.get("origin", (0.0, 0.0, 0.0))),
        data=data,
    )


def save_volume(v: ScalarVolume, path) -> None:
    """Write header JSON at `path` and an f32 payload next to it."""
    path = Path(path)
    data_file = path.stem + ".raw"
    header = {
        "dims": list(v.dims),
        "spacing": list(v.spacing),
        "origin": list(v.origin),
        "dtype": "f32",
        "value_range": [0.0, 1.0],
        "data_file": data_file,
    }
    path.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    # [x,y,z] indexing -> x-fastest payload
    payload = np.ascontiguousarray(v.data.transpose(2, 1, 0)).astype("<f4")
    payload.tofile(path.parent / data_file)


def load_transfer_function(path) -> TransferFunction:
    """Read a JSON list of {intensity, rgba} nodes."""
    try:
        nodes = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise FormatError(f"bad transfer function {path}: {e}") from e
    try:
        entries = tuple((node["intensity"], tuple(node["rgba"])) for node in nodes)
    except (TypeError, KeyError) as e:
        raise FormatError(f"bad transfer function {path}: {e}") from e
    return TransferFunction(entries)


def save_transfer_function(tf: TransferFunction, path) -> None:
    nodes = [{"intensity": i, "rgba": list(rgba)} for i, rgba in tf.entries]
    Path(path).write_text(json.dumps(nodes, indent=2) + "\n")


# ---------------------------------------------------------------------------
# Synthetic volumes (stand-ins for scanner data).


def synth_volume(kind: str, dims, spacing=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0),
                 **params) -> ScalarVolume:
    """Deterministic analytic test volume: 'sphere', 'shells', or 'ramp'.

    Dims below 2 are clamped up to 2. sphere: radius/feather in voxel units.
    shells: 0.5 + 0.5*sin(2*pi*r/period), period in voxels. ramp: axis in {0,1,2}.
    """
    dims = tuple(max(2, int(d)) for d in dims)
    nx, ny, nz = dims
    ix, iy, iz = np.meshgrid(
        np.arange(nx, dtype=np.float64),
        np.arange(ny, dtype=np.float64),
        np.arange(nz, dtype=np.float64),
        indexing="ij",
    )
    if kind in ("sphere", "shells"):
        center = params.get("center", tuple((d - 1) / 2.0 for d in dims))
        r = np.sqrt((ix - center[0]) ** 2 + (iy - center[1]) ** 2 + (iz - center[2]) ** 2)
    if kind == "sphere":
        radius = float(params.get("radius", min(dims) / 3.0))
        feather = float(params.get("feather", 0.0))
        if feather > 0.0:
            data = np.clip((radius - r) / feather, 0.0, 1.0)
        else:
            data = (r < radius).astype(np.float64)
    elif kind == "shells":
        period = float(params.get("period", 8.0))
        data = 0.5 + 0.5 * np.sin(2.0 * np.pi * r / period)
    elif kind == "ramp":
        axis = int(params.get("axis", 0))
        if axis not in (0, 1, 2):
            raise UsageError(f"ramp axis must be 0, 1 or 2, got {axis}")
        coord = (ix, iy, iz)[axis]
        data = coord / (dims[axis] - 1)
    else:
        raise UsageError(f"unknown synthetic volume kind '{kind}'")
    return ScalarVolume(
        dims=dims,
        spacing=tuple(float(s) for s in spacing),
        origin=tuple(float(o) for o in origin),
        data=data.astype(np.float32),
    )
