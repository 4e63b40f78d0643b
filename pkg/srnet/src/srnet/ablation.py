"""Ablation harness: trains network variants under one budget and reports the
comparison next to the published reference numbers (which come from proprietary
clinical volumes and full-scale training, so only the trends transfer here).
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

from .data import BundleDataset, UsageError
from .evaluate import evaluate
from .model import NetworkConfig, build_network
from .train import TrainConfig, train

PAPER_REFERENCE = {
    "note": "paper, not reproduced",
    "extra_feature": {
        "columns": ["with_extra_rgba", "without_extra_rgba"],
        "rows": {
            "CTA-Cardio": {"psnr_db": [38.09, 37.07], "ssim": [0.9705, 0.9683]},
            "Manix": {"psnr_db": [37.92, 36.96], "ssim": [0.9651, 0.9631]},
            "CTA-Abdomen": {"psnr_db": [31.89, 31.44], "ssim": [0.9560, 0.9557]},
        },
    },
    "n_prev": {
        "columns": ["N=1", "N=2", "N=3"],
        "rows": {
            "CTA-Abdomen": {"psnr_db": [31.86, 32.60, 32.98],
                            "ssim": [0.9552, 0.9606, 0.9638]},
            "CTA-Cardio": {"psnr_db": [39.35, 39.94, 40.49],
                           "ssim": [0.9690, 0.9755, 0.9783]},
        },
    },
    "factor": {
        "columns": ["4x4", "8x8", "16x16"],
        "rows": {
            "Manix": {"psnr_db": [42.37, 37.92, 33.65],
                      "ssim": [0.9787, 0.9651, 0.9471]},
        },
    },
}

ABLATION_KINDS = ("extra_feature", "n_prev", "factor")


def _train_and_eval(cfg: NetworkConfig, data_root, train_cfg: TrainConfig,
                    eval_split: str, max_eval_frames=None) -> dict:
    train_set = BundleDataset(data_root, "train", cfg.n_prev_frames,
                              cfg.use_max_alpha_rgba)
    model = build_network(cfg, seed=train_cfg.seed)
    train(model, train_set, train_cfg)
    eval_set = BundleDataset(data_root, eval_split, cfg.n_prev_frames,
                             cfg.use_max_alpha_rgba)
    report = evaluate(model, eval_set, max_frames=max_eval_frames)
    return report["aggregate"]


def run_ablation(kind: str, base_cfg: NetworkConfig, datasets: dict,
                 train_cfg: TrainConfig, eval_split: str = "val",
                 max_eval_frames=None, out_path=None) -> dict:
    """Train each variant of `kind` under the identical budget and tabulate.

    datasets maps upsample factor -> dataset root; non-factor ablations use
    datasets[base_cfg.upsample_factor] only.
    """
    if kind not in ABLATION_KINDS:
        raise UsageError(f"unknown ablation kind '{kind}'")
    base_root = datasets.get(base_cfg.upsample_factor)
    if kind in ("extra_feature", "n_prev") and base_root is None:
        raise UsageError(f"no dataset for factor {base_cfg.upsample_factor}")

    variants = []
    if kind == "extra_feature":
        variants = [("with_extra_rgba",
                     dataclasses.replace(base_cfg, use_max_alpha_rgba=True),
                     base_root),
                    ("without_extra_rgba",
                     dataclasses.replace(base_cfg, use_max_alpha_rgba=False),
                     base_root)]
    elif kind == "n_prev":
        variants = [(f"N={n}", dataclasses.replace(base_cfg, n_prev_frames=n),
                     base_root) for n in (1, 2, 3)]
    else:
        for s in (4, 8, 16):
            if s not in datasets:
                raise UsageError(f"factor ablation needs a dataset for {s}x")
            variants.append((f"{s}x{s}",
                             dataclasses.replace(base_cfg, upsample_factor=s),
                             datasets[s]))

    measured = {}
    for name, cfg, root in variants:
        measured[name] = _train_and_eval(cfg, root, train_cfg, eval_split,
                                         max_eval_frames)

    report = {
        "kind": kind,
        "budget": train_cfg.to_dict(),
        "measured": measured,
        "paper_reference": {"note": PAPER_REFERENCE["note"],
                            **PAPER_REFERENCE[kind]},
    }
    if out_path is not None:
        Path(out_path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report


def format_table(report: dict) -> str:
    """Plain-text table mirroring the published layout, measured block first."""
    lines = [f"ablation: {report['kind']}"]
    lines.append(f"{'variant':<22}{'PSNR(dB)':>10}{'SSIM':>9}")
    for name, agg in report["measured"].items():
        lines.append(f"{name:<22}{agg['psnr_db']:>10.2f}{agg['ssim']:>9.4f}")
    ref = report["paper_reference"]
    lines.append(f"reference ({ref['note']}):")
    header = f"{'dataset':<14}" + "".join(f"{c:>18}" for c in ref["columns"])
    lines.append(header)
    for row, vals in ref["rows"].items():
        cells = "".join(f"{p:>10.2f}/{s:<7.4f}"
                        for p, s in zip(vals["psnr_db"], vals["ssim"]))
        lines.append(f"{row:<14}{cells}")
    return "\n".join(lines)
