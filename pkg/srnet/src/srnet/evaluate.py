"""Full-frame evaluation: PSNR/SSIM per scene and aggregate, JSON reports, and
side-by-side comparison strips (bicubic | network | ground truth)."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .data import BundleDataset, UsageError
from .metrics import bicubic_upsample, psnr, ssim


class BicubicPredictor:
    """Identity-on-bicubic baseline: upsample the current frame's color."""

    def __init__(self, factor: int):
        self.factor = factor

    def __call__(self, frames, motions, validity) -> torch.Tensor:
        outs = []
        for b in range(frames.shape[0]):
            rgb = frames[b, 0, :3].permute(1, 2, 0).numpy()
            up = bicubic_upsample(rgb, self.factor)
            outs.append(torch.from_numpy(up.transpose(2, 0, 1)))
        return torch.stack(outs)


def _predict(predictor, frames, motions, validity) -> np.ndarray:
    with torch.no_grad():
        out = predictor(frames, motions, validity)
    return np.clip(out[0].permute(1, 2, 0).numpy(), 0.0, 1.0).astype(np.float32)


def evaluate(predictor, dataset: BundleDataset, max_frames: int | None = None) -> dict:
    """Metrics over every frame of the dataset's split (optionally capped),
    reported per scene and aggregated."""
    if isinstance(predictor, torch.nn.Module):
        predictor.eval()
    per_scene: dict[str, list] = {}
    n = len(dataset) if max_frames is None else min(max_frames, len(dataset))
    if n == 0:
        raise UsageError("nothing to evaluate")
    for idx in range(n):
        si, _t = dataset.samples[idx]
        scene = dataset.sequences[si].record.scene_id
        frames, motions, validity, hr = dataset.batch([idx])
        pred = _predict(predictor, frames, motions, validity)
        gt = hr[0].permute(1, 2, 0).numpy()
        per_scene.setdefault(scene, []).append(
            (psnr(pred, gt), ssim(pred, gt)))
    report = {"per_scene": {}, "aggregate": {}}
    all_vals = []
    for scene, vals in sorted(per_scene.items()):
        arr = np.asarray(vals, dtype=np.float64)
        report["per_scene"][scene] = {
            "psnr_db": float(arr[:, 0].mean()),
            "ssim": float(arr[:, 1].mean()),
            "n_frames": int(arr.shape[0]),
        }
        all_vals.append(arr)
    arr = np.concatenate(all_vals)
    report["aggregate"] = {
        "psnr_db": float(arr[:, 0].mean()),
        "ssim": float(arr[:, 1].mean()),
        "n_frames": int(arr.shape[0]),
    }
    return report


def write_report(report: dict, path) -> None:
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")


def save_comparison_strip(model, dataset: BundleDataset, idx: int, path,
                          separator: int = 2) -> None:
    """PNG strip for one frame: bicubic upsample | network output | ground truth."""
    frames, motions, validity, hr = dataset.batch([idx])
    pred = _predict(model, frames, motions, validity)
    bic = _predict(BicubicPredictor(dataset.upsample_factor), frames, motions,
                   validity)
    gt = np.clip(hr[0].permute(1, 2, 0).numpy(), 0.0, 1.0)
    h, w = gt.shape[:2]
    strip = np.ones((h, w * 3 + separator * 2, 3), np.float32)
    for k, img in enumerate((bic, pred, gt)):
        strip[:, k * (w + separator):k * (w + separator) + w] = img
    Image.fromarray((strip * 255.0 + 0.5).astype(np.uint8)).save(path)
