"""Camera-history motion vectors and the TAA accumulation pass.

Motion is derived by reprojecting each pixel's stored max-alpha world position
with the previous camera's (unjittered) view-projection; the offset from the
current pixel center to that location is the screen-space motion vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter, minimum_filter

from .camera import CameraState, project_to_pixel
from .errors import UsageError
from .ops import MotionField, bilinear_sample
from .render import FramePacket


@dataclass
class HistoryBuffer:
    """Accumulated TAA color; invalid before the first frame."""

    color: np.ndarray | None = None  # (H, W, 3) float32
    valid: bool = False

    @classmethod
    def empty(cls) -> "HistoryBuffer":
        return cls(None, False)


def compute_motion(packet: FramePacket, cam_prev: CameraState,
                   cam_curr: CameraState) -> MotionField:
    """Screen-space motion (du, dv) per pixel, current frame -> previous frame.

    Valid only where the packet has coverage, the reprojection lands inside the
    previous raster, and the point is in front of the previous camera.
    """
    w, h = packet.resolution
    if cam_curr.resolution != (w, h):
        raise UsageError(
            f"packet resolution {(w, h)} != camera {cam_curr.resolution}")
    # identical transforms reproject every point onto its own pixel; return the
    # exact zero field instead of float-noise offsets
    if (cam_prev.resolution == cam_curr.resolution
            and np.array_equal(cam_prev.view_proj, cam_curr.view_proj)):
        return MotionField.zero(w, h, validity=packet.coverage)
    pts = packet.max_alpha_worldpos.reshape(-1, 3).astype(np.float64)
    xy, w_clip = project_to_pixel(cam_prev, pts)
    xy = xy.reshape(h, w, 2)
    w_clip = w_clip.reshape(h, w)

    cols, rows = np.meshgrid(np.arange(w, dtype=np.float64),
                             np.arange(h, dtype=np.float64))
    motion = np.stack([xy[..., 0] - cols, xy[..., 1] - rows], axis=-1)

    pw, ph = cam_prev.resolution
    in_front = w_clip > 0.0
    with np.errstate(invalid="ignore"):
        in_bounds = ((xy[..., 0] >= -0.5) & (xy[..., 0] < pw - 0.5)
                     & (xy[..., 1] >= -0.5) & (xy[..., 1] < ph - 0.5))
    covered = packet.coverage[..., 0] > 0
    valid = covered & in_front & in_bounds
    motion[~valid] = 0.0
    return MotionField(motion.astype(np.float32),
                       valid[..., None].astype(np.float32))


def neighborhood_clamp(current: np.ndarray, history_sample, pixel) -> np.ndarray:
    """Clamp an rgb history sample to the per-channel min/max of the 3x3
    neighborhood of `pixel` (i=col, j=row) in the current frame; the
    neighborhood is truncated at image borders."""
    current = np.asarray(current)
    h, w = current.shape[:2]
    i, j = pixel
    if not (0 <= i < w and 0 <= j < h):
        raise UsageError(f"pixel {pixel} outside raster {(w, h)}")
    patch = current[max(j - 1, 0):j + 2, max(i - 1, 0):i + 2]
    lo = patch.min(axis=(0, 1))
    hi = patch.max(axis=(0, 1))
    return np.clip(np.asarray(history_sample, dtype=np.float64), lo, hi)


def _neighborhood_bounds(img: np.ndarray):
    # replicate-padding makes the border filter equal to the truncated-window min/max
    size = (3, 3, 1)
    return (minimum_filter(img, size=size, mode="nearest"),
            maximum_filter(img, size=size, mode="nearest"))


def taa_pass(curr: FramePacket, hist: HistoryBuffer, motion: MotionField,
             blend: float = 0.1):
    """One temporal accumulation step.

    Per pixel: reproject into the history color via the motion vector, clamp the
    sample to the current 3x3 neighborhood range, then output
    blend*current + (1-blend)*clamped. Pixels with no usable history pass the
    current color through. Returns (output color, new HistoryBuffer).
    """
    if not (0.0 < blend <= 1.0):
        raise UsageError(f"blend must lie in (0, 1], got {blend}")
    w, h = curr.resolution
    current = curr.color
    if not hist.valid:
        out = current.copy()
        return out, HistoryBuffer(out, True)
    if hist.color.shape != current.shape:
        raise UsageError(
            f"history shape {hist.color.shape} != current {current.shape}")
    if motion.resolution != (w, h):
        raise UsageError(f"motion resolution {motion.resolution} != {(w, h)}")

    cols, rows = np.meshgrid(np.arange(w, dtype=np.float64),
                             np.arange(h, dtype=np.float64))
    m = motion.motion.astype(np.float64)
    sampled, ok = bilinear_sample(hist.color, cols + m[..., 0], rows + m[..., 1])
    usable = ok & (motion.validity[..., 0] > 0)

    lo, hi = _neighborhood_bounds(current)
    clamped = np.clip(sampled, lo.astype(np.float64), hi.astype(np.float64))
    blended = blend * current.astype(np.float64) + (1.0 - blend) * clamped
    out = np.where(usable[..., None], blended, current.astype(np.float64))
    out = out.astype(np.float32)
    return out, HistoryBuffer(out, True)
