"""Image quality metrics and the bicubic reference upsampler.

Numerically equivalent to the renderer toolkit's metrics CLI: PSNR on [0,1]
floats with peak 1, SSIM with an 11x11 Gaussian window (sigma 1.5) over fully
interior windows, channel-averaged. Bicubic is Catmull-Rom (a = -0.5),
edge-clamped, align-corners = false.
"""

from __future__ import annotations

import math

import numpy as np


def psnr(pred, gt, peak: float = 1.0) -> float:
    a = np.asarray(pred, np.float64)
    b = np.asarray(gt, np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def _window(size=11, sigma=1.5):
    r = np.arange(size, dtype=np.float64) - (size - 1) / 2
    k = np.exp(-(r * r) / (2 * sigma * sigma))
    w = np.outer(k, k)
    return w / w.sum()


def _local_mean(x: np.ndarray, win: np.ndarray) -> np.ndarray:
    view = np.lib.stride_tricks.sliding_window_view(x, win.shape)
    return np.tensordot(view, win, axes=([2, 3], [0, 1]))


def ssim(pred, gt, peak: float = 1.0, window_size: int = 11,
         sigma: float = 1.5) -> float:
    a = np.asarray(pred, np.float64)
    b = np.asarray(gt, np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a = a[..., None]
        b = b[..., None]
    h, w, c = a.shape
    if h < window_size or w < window_size:
        raise ValueError(f"image {h}x{w} smaller than the {window_size} window")
    win = _window(window_size, sigma)
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    out = []
    for ch in range(c):
        x = a[..., ch]
        y = b[..., ch]
        mx = _local_mean(x, win)
        my = _local_mean(y, win)
        vx = _local_mean(x * x, win) - mx * mx
        vy = _local_mean(y * y, win) - my * my
        cov = _local_mean(x * y, win) - mx * my
        num = (2 * mx * my + c1) * (2 * cov + c2)
        den = (mx * mx + my * my + c1) * (vx + vy + c2)
        out.append(np.mean(num / den))
    return float(np.mean(out))


def _catmull_rom_weights(t: np.ndarray) -> np.ndarray:
    a = -0.5

    def near(x):
        return (a + 2) * x ** 3 - (a + 3) * x ** 2 + 1

    def far(x):
        return a * x ** 3 - 5 * a * x ** 2 + 8 * a * x - 4 * a

    return np.stack([far(1 + t), near(t), near(1 - t), far(2 - t)], axis=-1)


def _cubic_axis(img: np.ndarray, s: int, axis: int) -> np.ndarray:
    n = img.shape[axis]
    x = (np.arange(n * s, dtype=np.float64) + 0.5) / s - 0.5
    base = np.floor(x).astype(np.int64)
    wts = _catmull_rom_weights(x - base)
    moved = np.moveaxis(img, axis, 0).astype(np.float64)
    acc = np.zeros((n * s,) + moved.shape[1:], dtype=np.float64)
    for k in range(4):
        idx = np.clip(base - 1 + k, 0, n - 1)
        acc += wts[:, k].reshape((n * s,) + (1,) * (moved.ndim - 1)) * moved[idx]
    return np.moveaxis(acc, 0, axis)


def bicubic_upsample(img: np.ndarray, s: int) -> np.ndarray:
    """Catmull-Rom bicubic upsample of an (H, W, C) image by integer factor s."""
    s = int(s)
    if s < 1:
        raise ValueError(f"factor must be >= 1, got {s}")
    if s == 1:
        return np.asarray(img).copy()
    return _cubic_axis(_cubic_axis(np.asarray(img), s, 0), s, 1).astype(np.float32)
