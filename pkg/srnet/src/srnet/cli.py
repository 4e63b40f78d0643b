"""Command-line entry points: srnet-train, srnet-eval, srnet-ablate.

Exit codes: 0 success, 2 usage error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .ablation import format_table, run_ablation
from .data import BundleDataset, UsageError
from .evaluate import evaluate, save_comparison_strip, write_report
from .model import NetworkConfig, build_network
from .train import TrainConfig, load_checkpoint, train


def _run(fn, argv) -> int:
    try:
        fn(argv)
        return 0
    except (UsageError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (OSError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def _widths(text: str) -> tuple:
    return tuple(int(t) for t in text.split(","))


def _net_args(p: argparse.ArgumentParser):
    p.add_argument("--factor", type=int, default=4, choices=(4, 8, 16))
    p.add_argument("--n-prev", type=int, default=2)
    p.add_argument("--no-extra-feature", action="store_true",
                   help="drop the max-alpha RGBA input channels")
    p.add_argument("--feature-channels", type=int, default=32)
    p.add_argument("--reweight-channels", type=int, default=32)
    p.add_argument("--ae-widths", type=_widths, default=(64, 128, 256))


def _train_args(p: argparse.ArgumentParser):
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--batch", type=int, default=2)
    p.add_argument("--crop", type=int, default=24)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)


def _network_config(args) -> NetworkConfig:
    return NetworkConfig(
        upsample_factor=args.factor, n_prev_frames=args.n_prev,
        use_max_alpha_rgba=not args.no_extra_feature,
        feature_channels=args.feature_channels,
        reweight_channels=args.reweight_channels,
        autoencoder_widths=args.ae_widths)


def _train(argv):
    p = argparse.ArgumentParser(prog="srnet-train")
    p.add_argument("--data", required=True, help="dataset root (index.json)")
    p.add_argument("--out", required=True, help="run directory")
    _net_args(p)
    _train_args(p)
    args = p.parse_args(argv)

    cfg = _network_config(args)
    tcfg = TrainConfig(steps=args.steps, batch_size=args.batch, crop=args.crop,
                       learning_rate=args.lr, seed=args.seed)
    dataset = BundleDataset(args.data, "train", cfg.n_prev_frames,
                            cfg.use_max_alpha_rgba)
    model = build_network(cfg, seed=args.seed)
    history = train(model, dataset, tcfg, out_dir=args.out)
    print(f"final loss {history['loss'][-1]:.5f}; wrote {args.out}/checkpoint.pt")


def main_train(argv=None) -> int:
    return _run(_train, argv)


def _eval(argv):
    p = argparse.ArgumentParser(prog="srnet-eval")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="val", choices=("train", "val", "test"))
    p.add_argument("--report", required=True, help="output JSON path")
    p.add_argument("--strips", default=None, help="directory for PNG comparisons")
    args = p.parse_args(argv)

    model = load_checkpoint(args.checkpoint)
    dataset = BundleDataset(args.data, args.split, model.cfg.n_prev_frames,
                            model.cfg.use_max_alpha_rgba)
    report = evaluate(model, dataset)
    write_report(report, args.report)
    if args.strips:
        strips = Path(args.strips)
        strips.mkdir(parents=True, exist_ok=True)
        seen = set()
        for idx, (si, _t) in enumerate(dataset.samples):
            scene = dataset.sequences[si].record.scene_id
            if scene in seen:
                continue
            seen.add(scene)
            save_comparison_strip(model, dataset, idx,
                                  strips / f"{scene}_{args.split}.png")
    print(json.dumps(report["aggregate"], sort_keys=True))


def main_eval(argv=None) -> int:
    return _run(_eval, argv)


def _ablate(argv):
    p = argparse.ArgumentParser(prog="srnet-ablate")
    p.add_argument("--kind", required=True,
                   choices=("extra_feature", "n_prev", "factor"))
    p.add_argument("--data", required=True, help="dataset root for --factor size")
    p.add_argument("--data-8x", default=None)
    p.add_argument("--data-16x", default=None)
    p.add_argument("--out", required=True, help="output JSON path")
    p.add_argument("--split", default="val")
    _net_args(p)
    _train_args(p)
    args = p.parse_args(argv)

    datasets = {args.factor: args.data}
    if args.data_8x:
        datasets[8] = args.data_8x
    if args.data_16x:
        datasets[16] = args.data_16x
    if args.kind == "factor":
        datasets.setdefault(4, args.data)
    cfg = _network_config(args)
    tcfg = TrainConfig(steps=args.steps, batch_size=args.batch, crop=args.crop,
                       learning_rate=args.lr, seed=args.seed)
    report = run_ablation(args.kind, cfg, datasets, tcfg, eval_split=args.split,
                          out_path=args.out)
    print(format_table(report))


def main_ablate(argv=None) -> int:
    return _run(_ablate, argv)


if __name__ == "__main__":  # python -m srnet.cli <command> ...
    cmds = {"train": main_train, "eval": main_eval, "ablate": main_ablate}
    if len(sys.argv) < 2 or sys.argv[1] not in cmds:
        print(f"usage: python -m srnet.cli {{{','.join(cmds)}}} ...", file=sys.stderr)
        sys.exit(2)
    sys.exit(cmds[sys.argv[1]](sys.argv[2:]))
