"""Deterministic image-tensor operators shared by rendering, dataset generation,
and training: zero upsampling, motion-compensated warping, Charbonnier loss,
PSNR/SSIM, and the bicubic baseline.

Image tensors are (H, W, C) float32 rasters; pixel (row, col) centers sit at
continuous coordinates (x=col, y=row). Metric math runs in float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import correlate2d

from .errors import UsageError


@dataclass
class MotionField:
    """Screen-space offsets (du, dv) in pixels from each current pixel to its
    previous-frame location; validity flags where the offset is meaningful."""

    motion: np.ndarray    # (H, W, 2) float32
    validity: np.ndarray  # (H, W, 1) float32 0/1

    def __post_init__(self):
        if self.motion.ndim != 3 or self.motion.shape[2] != 2:
            raise UsageError(f"motion must be (H,W,2), got {self.motion.shape}")
        if self.validity.shape != self.motion.shape[:2] + (1,):
            raise UsageError(
                f"validity shape {self.validity.shape} != {self.motion.shape[:2] + (1,)}")
        self.motion = np.ascontiguousarray(self.motion, dtype=np.float32)
        self.validity = np.ascontiguousarray(self.validity, dtype=np.float32)

    @property
    def resolution(self) -> tuple[int, int]:
        h, w = self.motion.shape[:2]
        return (w, h)

    @classmethod
    def zero(cls, width: int, height: int, validity=None) -> "MotionField":
        v = (np.ones((height, width, 1), np.float32) if validity is None
             else np.asarray(validity, np.float32).reshape(height, width, 1))
        return cls(np.zeros((height, width, 2), np.float32), v)


@dataclass(frozen=True)
class CharbonnierParams:
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.epsilon <= 0:
            raise UsageError(f"epsilon must be > 0, got {self.epsilon}")


def _check_image(img, name="image") -> np.ndarray:
    a = np.asarray(img)
    if a.ndim != 3:
        raise UsageError(f"{name} must be (H,W,C), got shape {a.shape}")
    return a


def bilinear_sample(img: np.ndarray, x: np.ndarray, y: np.ndarray):
    """Bilinear gather from (H,W,C) at continuous coords; returns (values, valid).

    Coordinates outside [0, W-1] x [0, H-1] are invalid and produce zeros.
    Integer coordinates reproduce pixels bit-exactly.
    """
    img = _check_image(img)
    h, w, c = img.shape
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    valid = (x >= 0) & (x <= w - 1) & (y >= 0) & (y <= h - 1)
    xs = np.clip(x, 0, w - 1)
    ys = np.clip(y, 0, h - 1)
    x0 = np.minimum(np.floor(xs).astype(np.int64), max(w - 2, 0))
    y0 = np.minimum(np.floor(ys).astype(np.int64), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xs - x0)[..., None]
    fy = (ys - y0)[..., None]
    v = (img[y0, x0] * (1 - fx) * (1 - fy) + img[y0, x1] * fx * (1 - fy)
         + img[y1, x0] * (1 - fx) * fy + img[y1, x1] * fx * fy)
    v[~valid] = 0.0
    return v, valid


def zero_upsample(img: np.ndarray, s: int) -> np.ndarray:
    """Place each source pixel at the top-left of its s x s block, zeros elsewhere."""
    img = _check_image(img)
    s = int(s)
    if s < 1:
        raise UsageError(f"upsample factor must be >= 1, got {s}")
    if s == 1:
        return img.copy()
    h, w, c = img.shape
    out = np.zeros((h * s, w * s, c), dtype=img.dtype)
    out[::s, ::s] = img
    return out


def backward_warp(img: np.ndarray, motion: MotionField) -> np.ndarray:
    """Resample img at each pixel's previous-frame location; invalid motion or
    out-of-bounds footprints produce zeros."""
    img = _check_image(img)
    h, w, _ = img.shape
    if motion.resolution != (w, h):
        raise UsageError(
            f"motion resolution {motion.resolution} != image {(w, h)}")
    cols, rows = np.meshgrid(np.arange(w), np.arange(h))
    m = motion.motion.astype(np.float64)
    vals, ok = bilinear_sample(img, cols + m[..., 0], rows + m[..., 1])
    keep = ok & (motion.validity[..., 0] > 0)
    vals[~keep] = 0.0
    return vals.astype(img.dtype)


def scale_motion(motion: MotionField, s: int) -> MotionField:
    """Nearest-neighbor upsample of the field with offsets rescaled to the new
    pixel units."""
    s = int(s)
    if s < 1:
        raise UsageError(f"scale factor must be >= 1, got {s}")
    m = np.repeat(np.repeat(motion.motion, s, axis=0), s, axis=1) * np.float32(s)
    v = np.repeat(np.repeat(motion.validity, s, axis=0), s, axis=1)
    return MotionField(m, v)


def charbonnier_loss(pred, gt, p: CharbonnierParams = CharbonnierParams()) -> float:
    """Mean of sqrt((pred-gt)^2 + eps^2) over all pixel-channel elements."""
    a = np.asarray(pred, dtype=np.float64)
    b = np.asarray(gt, dtype=np.float64)
    if a.shape != b.shape:
        raise UsageError(f"shape mismatch {a.shape} vs {b.shape}")
    d = a - b
    return float(np.mean(np.sqrt(d * d + p.epsilon * p.epsilon)))


def psnr(pred, gt, peak: float = 1.0) -> float:
    """10*log10(peak^2 / MSE); +inf when the images are identical."""
    a = np.asarray(pred, dtype=np.float64)
    b = np.asarray(gt, dtype=np.float64)
    if a.shape != b.shape:
        raise UsageError(f"shape mismatch {a.shape} vs {b.shape}")
    if peak <= 0:
        raise UsageError(f"peak must be > 0, got {peak}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    r = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    k = np.exp(-(r * r) / (2.0 * sigma * sigma))
    k2 = np.outer(k, k)
    return k2 / k2.sum()


def ssim(pred, gt, peak: float = 1.0, window_size: int = 11, sigma: float = 1.5) -> float:
    """Mean local SSIM with a Gaussian window, averaged over channels.

    Windows are 'valid' (fully inside the image); images smaller than the
    window are rejected.
    """
    a = np.asarray(pred, dtype=np.float64)
    b = np.asarray(gt, dtype=np.float64)
    if a.shape != b.shape:
        raise UsageError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a = a[..., None]
        b = b[..., None]
    h, w, c = a.shape
    if h < window_size or w < window_size:
        raise UsageError(f"image {h}x{w} smaller than SSIM window {window_size}")
    win = _gaussian_window(window_size, sigma)
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    vals = []
    for ch in range(c):
        x = a[..., ch]
        y = b[..., ch]
        mu_x = correlate2d(x, win, mode="valid")
        mu_y = correlate2d(y, win, mode="valid")
        xx = correlate2d(x * x, win, mode="valid") - mu_x * mu_x
        yy = correlate2d(y * y, win, mode="valid") - mu_y * mu_y
        xy = correlate2d(x * y, win, mode="valid") - mu_x * mu_y
        num = (2 * mu_x * mu_y + c1) * (2 * xy + c2)
        den = (mu_x * mu_x + mu_y * mu_y + c1) * (xx + yy + c2)
        vals.append(np.mean(num / den))
    return float(np.mean(vals))


def _catmull_rom_weights(t: np.ndarray) -> np.ndarray:
    """Weights for taps at offsets (-1, 0, 1, 2) around the base index, a=-0.5."""
    a = -0.5

    def k1(x):  # |x| <= 1
        return (a + 2) * x ** 3 - (a + 3) * x ** 2 + 1

    def k2(x):  # 1 < |x| < 2
        return a * x ** 3 - 5 * a * x ** 2 + 8 * a * x - 4 * a

    return np.stack([k2(1 + t), k1(t), k1(1 - t), k2(2 - t)], axis=-1)


def _cubic_axis(img: np.ndarray, s: int, axis: int) -> np.ndarray:
    n = img.shape[axis]
    out_n = n * s
    x = (np.arange(out_n, dtype=np.float64) + 0.5) / s - 0.5
    base = np.floor(x).astype(np.int64)
    t = x - base
    wts = _catmull_rom_weights(t)  # (out_n, 4)
    acc = np.zeros((out_n,) + tuple(np.delete(img.shape, axis)), dtype=np.float64)
    moved = np.moveaxis(img, axis, 0).astype(np.float64)
    for k in range(4):
        idx = np.clip(base - 1 + k, 0, n - 1)
        w = wts[:, k].reshape((out_n,) + (1,) * (img.ndim - 1))
        acc += w * moved[idx]
    return np.moveaxis(acc, 0, axis)


def bicubic_upsample(img: np.ndarray, s: int) -> np.ndarray:
    """Catmull-Rom bicubic upsampling (a=-0.5), edge-clamped, align-corners=false."""
    img = _check_image(img)
    s = int(s)
    if s < 1:
        raise UsageError(f"upsample factor must be >= 1, got {s}")
    if s == 1:
        return img.copy()
    out = _cubic_axis(_cubic_axis(img, s, 0), s, 1)
    return out.astype(img.dtype if img.dtype.kind == "f" else np.float32)
