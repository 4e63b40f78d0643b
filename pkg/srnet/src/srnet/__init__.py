"""Temporal super-resolution training for rendered volume sequences."""

from .ablation import PAPER_REFERENCE, format_table, run_ablation
from .data import BundleDataset, FrameBundle, UsageError, compose_motion, load_dataset_index
from .evaluate import BicubicPredictor, evaluate, save_comparison_strip, write_report
from .losses import charbonnier
from .metrics import bicubic_upsample, psnr, ssim
from .model import (NetworkConfig, SRNet, backward_warp, build_network,
                    scale_motion, zero_upsample)
from .train import TrainConfig, load_checkpoint, save_checkpoint, train
from .vsrt import read_tensor, write_tensor

__version__ = "0.1.0"
