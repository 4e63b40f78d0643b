"""Command-line entry points: gen-dataset, render, metrics, baseline, make-volume.

Exit codes: 0 success, 2 usage error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import dataset as ds
from .camera import CameraState
from .errors import DataError, FormatError, UsageError
from .ops import bicubic_upsample, psnr, ssim
from .render import render_frame
from .tensorio import read_tensor, write_tensor
from .volume import (load_transfer_function, load_volume, save_transfer_function,
                     save_volume, synth_volume)


def _parse_pair(text: str, what: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise UsageError(f"{what} must look like WxH, got '{text}'")
    return int(parts[0]), int(parts[1])


def _parse_triple(text: str, what: str) -> tuple[int, int, int]:
    parts = text.lower().split("x")
    if len(parts) != 3:
        raise UsageError(f"{what} must look like NXxNYxNZ, got '{text}'")
    return tuple(int(p) for p in parts)


def _run(fn, argv) -> int:
    try:
        fn(argv)
        return 0
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (FormatError, DataError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


# --- gen-dataset -----------------------------------------------------------

def _gen_dataset(argv):
    p = argparse.ArgumentParser(
        prog="gen-dataset",
        description="Render LR/HR training sequences for one scene.")
    p.add_argument("--scene", required=True, help="volume header JSON")
    p.add_argument("--tf", required=True, help="transfer function JSON")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--factor", type=int, choices=(4, 8, 16), default=4)
    p.add_argument("--lr", default="64x64", help="LR resolution WxH")
    p.add_argument("--sequences", type=int, default=6)
    p.add_argument("--frames", type=int, default=24)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scene-id", default=None, help="defaults to the scene file stem")
    args = p.parse_args(argv)

    volume = load_volume(args.scene)
    tf = load_transfer_function(args.tf)
    scene_id = args.scene_id or Path(args.scene).stem
    ds.generate_dataset(
        volume, tf, args.out, scene_id=scene_id, n_sequences=args.sequences,
        n_frames=args.frames, lr_resolution=_parse_pair(args.lr, "--lr"),
        upsample_factor=args.factor, seed=args.seed)
    print(f"wrote {args.sequences} sequences to {args.out}")


def main_gen_dataset(argv=None) -> int:
    return _run(_gen_dataset, argv)


# --- render ------------------------------------------------------------------

def _render(argv):
    p = argparse.ArgumentParser(prog="render",
                                description="Render one frame to a VSRT tensor.")
    p.add_argument("--scene", required=True, help="volume header JSON")
    p.add_argument("--tf", required=True, help="transfer function JSON")
    p.add_argument("--camera", required=True, help="camera JSON")
    p.add_argument("--out", required=True, help="output .vsrt (color raster)")
    p.add_argument("--features-dir", default=None,
                   help="also dump depth/rgba/coverage channels here")
    args = p.parse_args(argv)

    volume = load_volume(args.scene)
    tf = load_transfer_function(args.tf)
    try:
        spec = json.loads(Path(args.camera).read_text())
    except json.JSONDecodeError as e:
        raise FormatError(f"bad camera file {args.camera}: {e}") from e
    cam = CameraState.look_at(
        position=spec["position"], target=spec["target"],
        up=spec.get("up", (0.0, 0.0, 1.0)), fov_y_deg=spec.get("fov_y_deg", 45.0),
        resolution=spec.get("resolution", (256, 256)),
        near=spec.get("near", 0.1), far=spec.get("far", 100.0),
        jitter=spec.get("jitter", (0.0, 0.0)))
    packet = render_frame(volume, tf, cam)
    write_tensor(args.out, packet.color)
    if args.features_dir:
        fd = Path(args.features_dir)
        fd.mkdir(parents=True, exist_ok=True)
        write_tensor(fd / "quasi_depth.vsrt", packet.quasi_depth)
        write_tensor(fd / "max_alpha_rgba.vsrt", packet.max_alpha_rgba)
        write_tensor(fd / "max_alpha_worldpos.vsrt", packet.max_alpha_worldpos)
        write_tensor(fd / "coverage.vsrt", packet.coverage)
    print(f"wrote {args.out}")


def main_render(argv=None) -> int:
    return _run(_render, argv)


# --- metrics -----------------------------------------------------------------

def _metrics(argv):
    p = argparse.ArgumentParser(
        prog="metrics",
        description="PSNR/SSIM per matching .vsrt pair, one JSON object per line.")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    args = p.parse_args(argv)

    pred_dir, gt_dir = Path(args.pred), Path(args.gt)
    names = sorted(f.name for f in pred_dir.glob("*.vsrt"))
    if not names:
        raise UsageError(f"no .vsrt files in {pred_dir}")
    for name in names:
        gt_path = gt_dir / name
        if not gt_path.exists():
            raise DataError(f"missing ground truth for {name}")
        pred = np.clip(read_tensor(pred_dir / name), 0.0, 1.0)
        gt = read_tensor(gt_path)
        p_db = psnr(pred, gt, peak=1.0)
        rec = {
            "file": name,
            "psnr_db": "inf" if math.isinf(p_db) else round(p_db, 6),
            "ssim": round(ssim(pred, gt, peak=1.0), 6),
        }
        print(json.dumps(rec, sort_keys=True))


def main_metrics(argv=None) -> int:
    return _run(_metrics, argv)


# --- baseline ---------------------------------------------------------------

def _baseline(argv):
    p = argparse.ArgumentParser(
        prog="baseline",
        description="Bicubic-upsample every .vsrt in a directory.")
    p.add_argument("--factor", type=int, required=True)
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", dest="out_dir", required=True)
    args = p.parse_args(argv)

    if args.factor < 1:
        raise UsageError(f"--factor must be >= 1, got {args.factor}")
    in_dir, out_dir = Path(args.in_dir), Path(args.out_dir)
    names = sorted(f.name for f in in_dir.glob("*.vsrt"))
    if not names:
        raise UsageError(f"no .vsrt files in {in_dir}")
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in names:
        img = read_tensor(in_dir / name)
        up = np.clip(bicubic_upsample(img, args.factor), 0.0, 1.0)
        write_tensor(out_dir / name, up)
    print(f"wrote {len(names)} tensors to {out_dir}")


def main_baseline(argv=None) -> int:
    return _run(_baseline, argv)


# --- make-volume -------------------------------------------------------------

DEFAULT_TF = [
    {"intensity": 0.0, "rgba": [0.0, 0.0, 0.0, 0.0]},
    {"intensity": 0.3, "rgba": [0.3, 0.1, 0.05, 0.0]},
    {"intensity": 0.6, "rgba": [0.9, 0.6, 0.3, 0.55]},
    {"intensity": 1.0, "rgba": [1.0, 0.95, 0.9, 0.95]},
]


def _make_volume(argv):
    p = argparse.ArgumentParser(
        prog="make-volume",
        description="Write a synthetic test volume (header JSON + raw payload).")
    p.add_argument("--kind", required=True, choices=("sphere", "shells", "ramp"))
    p.add_argument("--dims", default="64x64x64")
    p.add_argument("--out", required=True, help="header JSON path")
    p.add_argument("--radius", type=float, default=None)
    p.add_argument("--feather", type=float, default=0.0)
    p.add_argument("--period", type=float, default=8.0)
    p.add_argument("--axis", type=int, default=0)
    p.add_argument("--tf-out", default=None,
                   help="also write a generic transfer function JSON")
    args = p.parse_args(argv)

    dims = _parse_triple(args.dims, "--dims")
    params = {}
    if args.kind == "sphere":
        params["radius"] = args.radius if args.radius is not None else min(dims) / 3
        params["feather"] = args.feather
    elif args.kind == "shells":
        params["period"] = args.period
    else:
        params["axis"] = args.axis
    vol = synth_volume(args.kind, dims, **params)
    save_volume(vol, args.out)
    if args.tf_out:
        Path(args.tf_out).write_text(json.dumps(DEFAULT_TF, indent=2) + "\n")
    print(f"wrote {args.out}")


def main_make_volume(argv=None) -> int:
    return _run(_make_volume, argv)


if __name__ == "__main__":  # python -m volsr.cli <command> ...
    cmds = {"gen-dataset": main_gen_dataset, "render": main_render,
            "metrics": main_metrics, "baseline": main_baseline,
            "make-volume": main_make_volume}
    if len(sys.argv) < 2 or sys.argv[1] not in cmds:
        print(f"usage: python -m volsr.cli {{{','.join(cmds)}}} ...", file=sys.stderr)
        sys.exit(2)
    sys.exit(cmds[sys.argv[1]](sys.argv[2:]))
