"""Pinhole camera model, ray generation, and pixel projection.

Conventions: right-handed world, camera looks down -z in view space, OpenGL-style
perspective projection. Raster coordinates put the center of pixel (row j, col i)
at continuous position (x=i, y=j); x grows rightward, y grows downward.
view/proj matrices never include the sub-pixel jitter; jitter only shifts rays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError


def perspective(fov_y_deg: float, aspect: float, near: float, far: float) -> np.ndarray:
    if near <= 0 or far <= near:
        raise UsageError(f"need 0 < near < far, got near={near} far={far}")
    f = 1.0 / math.tan(math.radians(fov_y_deg) / 2.0)
    m = np.zeros((4, 4), dtype=np.float64)
    m[0, 0] = f / aspect
    m[1, 1] = f
    m[2, 2] = (far + near) / (near - far)
    m[2, 3] = 2.0 * far * near / (near - far)
    m[3, 2] = -1.0
    return m


def look_at_matrix(eye, target, up) -> np.ndarray:
    eye = np.asarray(eye, dtype=np.float64)
    fwd = np.asarray(target, dtype=np.float64) - eye
    n = np.linalg.norm(fwd)
    if n < 1e-12:
        raise UsageError("camera eye and target coincide")
    fwd = fwd / n
    right = np.cross(fwd, np.asarray(up, dtype=np.float64))
    rn = np.linalg.norm(right)
    if rn < 1e-12:
        raise UsageError("camera up vector is parallel to the view direction")
    right = right / rn
    true_up = np.cross(right, fwd)
    m = np.eye(4, dtype=np.float64)
    m[0, :3] = right
    m[1, :3] = true_up
    m[2, :3] = -fwd
    m[:3, 3] = -m[:3, :3] @ eye
    return m


@dataclass(frozen=True)
class CameraState:
    """Camera pose + projection + raster resolution + sub-pixel jitter."""

    position: tuple[float, float, float]
    view: np.ndarray = field(repr=False)   # 4x4 world -> camera
    proj: np.ndarray = field(repr=False)   # 4x4 camera -> clip
    resolution: tuple[int, int]            # (W, H)
    jitter: tuple[float, float] = (0.0, 0.0)
    near: float = 0.1
    far: float = 100.0

    def __post_init__(self):
        r = self.view[:3, :3]
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-8) or np.linalg.det(r) < 0:
            raise UsageError("view matrix is not a rigid transform")
        if abs(np.linalg.det(self.proj)) < 1e-12:
            raise UsageError("projection matrix is singular")
        jx, jy = self.jitter
        if not (-0.5 <= jx < 0.5 and -0.5 <= jy < 0.5):
            raise UsageError(f"jitter must lie in [-0.5, 0.5), got {self.jitter}")
        w, h = self.resolution
        if w < 1 or h < 1:
            raise UsageError(f"bad resolution {self.resolution}")
        object.__setattr__(self, "view", _frozen(self.view))
        object.__setattr__(self, "proj", _frozen(self.proj))

    @classmethod
    def look_at(cls, position, target, up=(0.0, 0.0, 1.0), fov_y_deg=45.0,
                resolution=(64, 64), near=0.1, far=100.0, jitter=(0.0, 0.0)):
        w, h = resolution
        return cls(
            position=tuple(float(p) for p in position),
            view=look_at_matrix(position, target, up),
            proj=perspective(fov_y_deg, w / h, near, far),
            resolution=(int(w), int(h)),
            jitter=(float(jitter[0]), float(jitter[1])),
            near=float(near),
            far=float(far),
        )

    @property
    def view_proj(self) -> np.ndarray:
        return self.proj @ self.view

    @property
    def forward(self) -> np.ndarray:
        return -self.view[2, :3].copy()

    def with_jitter(self, jitter) -> "CameraState":
        return CameraState(self.position, self.view.copy(), self.proj.copy(),
                           self.resolution, (float(jitter[0]), float(jitter[1])),
                           self.near, self.far)

    def with_resolution(self, resolution) -> "CameraState":
        """Same frustum at a different raster size (aspect must be preserved)."""
        w0, h0 = self.resolution
        w1, h1 = int(resolution[0]), int(resolution[1])
        if w0 * h1 != w1 * h0:
            raise UsageError(f"resolution {resolution} changes the aspect ratio")
        return CameraState(self.position, self.view.copy(), self.proj.copy(),
                           (w1, h1), self.jitter, self.near, self.far)


def _frozen(m) -> np.ndarray:
    m = np.ascontiguousarray(np.asarray(m, dtype=np.float64))
    if m.shape != (4, 4):
        raise UsageError(f"expected 4x4 matrix, got {m.shape}")
    m.flags.writeable = False
    return m


def generate_ray(cam: CameraState, pixel: tuple[int, int]):
    """World-space ray {origin, unit direction} through pixel (i=col, j=row) center
    plus cam.jitter."""
    i, j = pixel
    w, h = cam.resolution
    if not (0 <= i < w and 0 <= j < h):
        raise UsageError(f"pixel {pixel} outside raster {cam.resolution}")
    dirs = generate_rays(cam, pixels=np.array([[i, j]], dtype=np.int64))
    return np.asarray(cam.position, dtype=np.float64), dirs[0]


def generate_rays(cam: CameraState, pixels=None) -> np.ndarray:
    """Unit ray directions for all pixels, shape (H,W,3), or for an (N,2) list of
    (i,j) pixels, shape (N,3). Origin is cam.position for every ray."""
    w, h = cam.resolution
    jx, jy = cam.jitter
    if pixels is None:
        xs = (np.arange(w, dtype=np.float64) + 0.5 + jx)[None, :]
        ys = (np.arange(h, dtype=np.float64) + 0.5 + jy)[:, None]
        ndc_x = np.broadcast_to(2.0 * xs / w - 1.0, (h, w))
        ndc_y = np.broadcast_to(1.0 - 2.0 * ys / h, (h, w))
    else:
        pixels = np.asarray(pixels)
        ndc_x = 2.0 * (pixels[:, 0] + 0.5 + jx) / w - 1.0
        ndc_y = 1.0 - 2.0 * (pixels[:, 1] + 0.5 + jy) / h
    inv_vp = np.linalg.inv(cam.view_proj)

    def unproject(z):
        ndc = np.stack([ndc_x, ndc_y, np.full_like(ndc_x, z), np.ones_like(ndc_x)], axis=-1)
        p = ndc @ inv_vp.T
        return p[..., :3] / p[..., 3:4]

    p_near = unproject(-1.0)
    p_far = unproject(1.0)
    d = p_far - p_near
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


def project_to_pixel(cam: CameraState, p):
    """Project world point(s) to raster pixel coords (x, y) plus clip-space w.

    Uses the unjittered view_proj. w <= 0 means the point is behind the camera.
    p is (3,) or (N,3); returns ((x,y), w) or ((N,2), (N,)).
    """
    q = np.atleast_2d(np.asarray(p, dtype=np.float64))
    hom = np.concatenate([q, np.ones((q.shape[0], 1))], axis=1)
    clip = hom @ cam.view_proj.T
    w_clip = clip[:, 3]
    with np.errstate(divide="ignore", invalid="ignore"):
        ndc = clip[:, :3] / w_clip[:, None]
    w, h = cam.resolution
    xy = np.empty((q.shape[0], 2), dtype=np.float64)
    xy[:, 0] = ((ndc[:, 0] + 1.0) * w - 1.0) / 2.0
    xy[:, 1] = ((1.0 - ndc[:, 1]) * h - 1.0) / 2.0
    if np.asarray(p).ndim == 1:
        return xy[0], float(w_clip[0])
    return xy, w_clip


def halton(base: int, index: int) -> float:
    """Radical-inverse Halton sample, index >= 1."""
    f, r = 1.0, 0.0
    while index > 0:
        f /= base
        r += f * (index % base)
        index //= base
    return r


def halton_jitter(frame: int, cycle: int = 8) -> tuple[float, float]:
    """Sub-pixel jitter for TAA: Halton(2,3) offsets cycling every `cycle` frames."""
    i = frame % cycle + 1
    return (halton(2, i) - 0.5, halton(3, i) - 0.5)
