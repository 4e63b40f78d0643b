import json
import subprocess
import sys

import numpy as np
import pytest
import torch

torch.set_num_threads(1)

TF_BANDS = [
    {"intensity": 0.0, "rgba": [0.05, 0.05, 0.1, 0.0]},
    {"intensity": 0.25, "rgba": [0.9, 0.2, 0.1, 0.15]},
    {"intensity": 0.5, "rgba": [0.1, 0.9, 0.3, 0.55]},
    {"intensity": 0.75, "rgba": [0.2, 0.3, 0.95, 0.25]},
    {"intensity": 1.0, "rgba": [0.95, 0.9, 0.2, 0.8]},
]


def renderer_cli(command, *args):
    """The renderer toolkit is consumed strictly through its CLI + file formats."""
    proc = subprocess.run(
        [sys.executable, "-m", "volsr.cli", command, *map(str, args)],
        capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(f"{command} failed: {proc.stderr}")
    return proc.stdout


def generate_dataset(out_dir, *, dims="32x32x32", period=5, lr="16x16", factor=4,
                     sequences=6, frames=6, seed=3):
    out_dir.mkdir(parents=True, exist_ok=True)
    vol = out_dir / "vol.json"
    tf = out_dir / "tf.json"
    tf.write_text(json.dumps(TF_BANDS))
    renderer_cli("make-volume", "--kind", "shells", "--dims", dims,
                 "--period", period, "--out", vol)
    renderer_cli("gen-dataset", "--scene", vol, "--tf", tf,
                 "--out", out_dir / "ds", "--factor", factor, "--lr", lr,
                 "--sequences", sequences, "--frames", frames, "--seed", seed)
    return out_dir / "ds"


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """6 sequences x 6 frames of a 32^3 shells scene at 16x16 -> 64x64 (4x)."""
    return generate_dataset(tmp_path_factory.mktemp("tiny"))


@pytest.fixture
def rng():
    return np.random.default_rng(77)
