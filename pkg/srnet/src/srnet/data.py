"""Dataset access: manifests, frame bundles, motion chaining, and crop sampling.

A frame bundle for time t stacks frames t, t-1, ..., t-N (index 0 = current)
with per-frame channels [color(3), quasi_depth(1), max_alpha_rgba(4)?] and, per
previous frame, the screen-space motion from t composed across intermediate
frames. Only t >= N is sampled so every chained motion field exists.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .vsrt import read_tensor


class UsageError(Exception):
    pass


@dataclass
class SequenceRecord:
    directory: Path
    scene_id: str
    sequence_id: str
    split: str
    n_frames: int
    lr_resolution: tuple[int, int]  # (W, H)
    hr_resolution: tuple[int, int]
    upsample_factor: int
    frames: list


def load_dataset_index(root) -> list[SequenceRecord]:
    root = Path(root)
    index = json.loads((root / "index.json").read_text())
    records = []
    for entry in index["sequences"]:
        mdir = root / entry["dir"]
        m = json.loads((mdir / "manifest.json").read_text())
        records.append(SequenceRecord(
            directory=mdir, scene_id=m["scene_id"], sequence_id=m["sequence_id"],
            split=m["split"], n_frames=m["n_frames"],
            lr_resolution=tuple(m["lr_resolution"]),
            hr_resolution=tuple(m["hr_resolution"]),
            upsample_factor=m["upsample_factor"], frames=m["frames"]))
    return records


class SequenceCache:
    """Loads one sequence's tensors lazily and keeps them in memory."""

    def __init__(self, record: SequenceRecord):
        self.record = record
        self._cache = {}

    def raster(self, frame: int, key: str) -> np.ndarray:
        k = (frame, key)
        if k not in self._cache:
            name = self.record.frames[frame][key]
            self._cache[k] = read_tensor(self.record.directory / name)
        return self._cache[k]

    def lr_input(self, frame: int, use_max_alpha_rgba: bool) -> np.ndarray:
        parts = [self.raster(frame, "lr_color"), self.raster(frame, "lr_quasi_depth")]
        if use_max_alpha_rgba:
            parts.append(self.raster(frame, "lr_max_alpha_rgba"))
        return np.concatenate(parts, axis=2)

    def motion(self, frame: int) -> np.ndarray:
        return self.raster(frame, "lr_motion")  # (H, W, 3): du, dv, validity

    def hr(self, frame: int) -> np.ndarray:
        return self.raster(frame, "hr_color")


def _bilinear(img: np.ndarray, x: np.ndarray, y: np.ndarray):
    """Gather img (H,W,C) at continuous coords; returns (values, in_bounds)."""
    h, w = img.shape[:2]
    valid = (x >= 0) & (x <= w - 1) & (y >= 0) & (y <= h - 1)
    xs = np.clip(x, 0, w - 1)
    ys = np.clip(y, 0, h - 1)
    x0 = np.minimum(np.floor(xs).astype(np.int64), max(w - 2, 0))
    y0 = np.minimum(np.floor(ys).astype(np.int64), max(h - 2, 0))
    fx = (xs - x0)[..., None]
    fy = (ys - y0)[..., None]
    v = (img[y0, x0] * (1 - fx) * (1 - fy) + img[y0, x0 + 1] * fx * (1 - fy)
         + img[y0 + 1, x0] * (1 - fx) * fy + img[y0 + 1, x0 + 1] * fx * fy)
    v[~valid] = 0.0
    return v, valid


def compose_motion(motion_rasters: list[np.ndarray]) -> np.ndarray:
    """Chain per-frame motion fields (each frame j -> j-1, ordered t, t-1, ...)
    into one field from frame t to frame t-k, with bilinear resampling of the
    intermediate fields. Returns (H, W, 3) du, dv, validity."""
    first = motion_rasters[0]
    h, w = first.shape[:2]
    acc = first[..., :2].astype(np.float64)
    valid = first[..., 2] > 0
    cols, rows = np.meshgrid(np.arange(w, dtype=np.float64),
                             np.arange(h, dtype=np.float64))
    for nxt in motion_rasters[1:]:
        hop, ok = _bilinear(nxt.astype(np.float64), cols + acc[..., 0],
                            rows + acc[..., 1])
        # a chained tap is only valid if every contributing sample was valid
        valid = valid & ok & (hop[..., 2] > 0.9999)
        acc = acc + hop[..., :2]
    acc[~valid] = 0.0
    out = np.concatenate([acc, valid[..., None].astype(np.float64)], axis=2)
    return out.astype(np.float32)


@dataclass
class FrameBundle:
    """One training/eval sample as torch tensors."""

    frames: torch.Tensor    # (N+1, C, h, w), index 0 = current frame
    motions: torch.Tensor   # (N, 2, h, w), current -> prev k
    validity: torch.Tensor  # (N, 1, h, w)
    hr: torch.Tensor        # (3, s*h, s*w)

    @property
    def n_prev(self) -> int:
        return self.frames.shape[0] - 1


class BundleDataset:
    """Assembles FrameBundles from rendered sequences of one split."""

    def __init__(self, root, split: str, n_prev: int, use_max_alpha_rgba: bool):
        if n_prev < 1:
            raise UsageError(f"n_prev must be >= 1, got {n_prev}")
        records = [r for r in load_dataset_index(root) if r.split == split]
        if not records:
            raise UsageError(f"split '{split}' has no sequences in {root}")
        self.split = split
        self.n_prev = n_prev
        self.use_max_alpha_rgba = use_max_alpha_rgba
        self.sequences = [SequenceCache(r) for r in records]
        self.samples = [(si, t) for si, r in enumerate(records)
                        for t in range(n_prev, r.n_frames)]
        if not self.samples:
            raise UsageError(
                f"split '{split}' has no frames with {n_prev} predecessors")
        self.upsample_factor = records[0].upsample_factor

    def __len__(self) -> int:
        return len(self.samples)

    def bundle(self, idx: int, crop: int | None = None,
               rng: np.random.Generator | None = None) -> FrameBundle:
        si, t = self.samples[idx]
        seq = self.sequences[si]
        s = seq.record.upsample_factor
        n = self.n_prev

        frames = [seq.lr_input(t - k, self.use_max_alpha_rgba) for k in range(n + 1)]
        motions = []
        for k in range(1, n + 1):
            chain = [seq.motion(t - j) for j in range(k)]
            motions.append(compose_motion(chain))
        hr = seq.hr(t)

        if crop is not None:
            h, w = frames[0].shape[:2]
            if crop > min(h, w):
                raise UsageError(f"crop {crop} exceeds LR frame {w}x{h}")
            if rng is None:
                y0 = (h - crop) // 2
                x0 = (w - crop) // 2
            else:
                y0 = int(rng.integers(0, h - crop + 1))
                x0 = int(rng.integers(0, w - crop + 1))
            frames = [f[y0:y0 + crop, x0:x0 + crop] for f in frames]
            motions = [m[y0:y0 + crop, x0:x0 + crop] for m in motions]
            hr = hr[s * y0:s * (y0 + crop), s * x0:s * (x0 + crop)]

        to_chw = lambda a: torch.from_numpy(np.ascontiguousarray(
            a.transpose(2, 0, 1))).float()
        return FrameBundle(
            frames=torch.stack([to_chw(f) for f in frames]),
            motions=torch.stack([to_chw(m[..., :2]) for m in motions]),
            validity=torch.stack([to_chw(m[..., 2:3]) for m in motions]),
            hr=to_chw(hr),
        )

    def batch(self, idxs, crop: int | None = None,
              rng: np.random.Generator | None = None):
        bundles = [self.bundle(i, crop, rng) for i in idxs]
        return (torch.stack([b.frames for b in bundles]),
                torch.stack([b.motions for b in bundles]),
                torch.stack([b.validity for b in bundles]),
                torch.stack([b.hr for b in bundles]))
