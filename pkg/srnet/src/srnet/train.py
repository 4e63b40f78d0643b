"""Training loop: Adam on Charbonnier loss over random aligned LR/HR crops."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .data import BundleDataset
from .losses import charbonnier
from .model import NetworkConfig, SRNet, build_network


@dataclass
class TrainConfig:
    steps: int = 2000
    batch_size: int = 2
    crop: int = 24
    learning_rate: float = 1e-3
    lr_final_scale: float = 0.1   # cosine-decay floor as a fraction of learning_rate
    seed: int = 0
    log_every: int = 50

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def save_checkpoint(model: SRNet, path) -> None:
    torch.save({"state_dict": model.state_dict(),
                "config": model.cfg.to_dict()}, path)


def load_checkpoint(path) -> SRNet:
    blob = torch.load(path, map_location="cpu", weights_only=False)
    model = SRNet(NetworkConfig.from_dict(blob["config"]))
    model.load_state_dict(blob["state_dict"])
    model.eval()
    return model


def train(model: SRNet, dataset: BundleDataset, cfg: TrainConfig,
          out_dir=None, callback=None) -> dict:
    """Minimize Charbonnier loss between network output and HR ground truth.

    callback(step, model) may return True to stop early (e.g. a validation
    target was reached). Returns the training history; when out_dir is given,
    persists checkpoint.pt and loss_curve.json there.
    """
    import math

    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    history = {"step": [], "loss": []}
    model.train()
    stopped = None
    for step in range(cfg.steps):
        frac = step / max(cfg.steps - 1, 1)
        scale = (cfg.lr_final_scale
                 + (1 - cfg.lr_final_scale) * 0.5 * (1 + math.cos(math.pi * frac)))
        for group in opt.param_groups:
            group["lr"] = cfg.learning_rate * scale
        idxs = rng.integers(0, len(dataset), size=cfg.batch_size)
        frames, motions, validity, hr = dataset.batch(idxs, crop=cfg.crop, rng=rng)
        out = model(frames, motions, validity)
        loss = charbonnier(out, hr)
        opt.zero_grad()
        loss.backward()
        opt.step()
        if step % cfg.log_every == 0 or step == cfg.steps - 1:
            history["step"].append(step)
            history["loss"].append(float(loss.item()))
        if callback is not None and callback(step, model):
            stopped = step
            break
    history["stopped_at"] = stopped
    model.eval()
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        save_checkpoint(model, out_dir / "checkpoint.pt")
        (out_dir / "loss_curve.json").write_text(
            json.dumps(history, indent=2) + "\n")
    return history
