"""Super-resolution network: shared residual feature extraction per frame,
zero upsampling to the target grid, motion-compensated warping of previous
frames, pixel-wise reweighting, and a skip-connected autoencoder reconstructor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn as nn
import torch.nn.functional as F

SUPPORTED_FACTORS = (4, 8, 16)


@dataclass(frozen=True)
class NetworkConfig:
    upsample_factor: int = 4
    n_prev_frames: int = 2
    use_max_alpha_rgba: bool = True
    feature_channels: int = 32
    reweight_channels: int = 32
    autoencoder_widths: tuple = (64, 128, 256)
    weight_max: float = 10.0

    def __post_init__(self):
        if self.upsample_factor not in SUPPORTED_FACTORS:
            raise ValueError(
                f"upsample_factor must be one of {SUPPORTED_FACTORS}, "
                f"got {self.upsample_factor}")
        if self.n_prev_frames < 1:
            raise ValueError(f"n_prev_frames must be >= 1, got {self.n_prev_frames}")
        if len(self.autoencoder_widths) < 2:
            raise ValueError("autoencoder needs at least 2 levels")

    @property
    def in_channels(self) -> int:
        return 8 if self.use_max_alpha_rgba else 4

    def to_dict(self) -> dict:
        return {
            "upsample_factor": self.upsample_factor,
            "n_prev_frames": self.n_prev_frames,
            "use_max_alpha_rgba": self.use_max_alpha_rgba,
            "feature_channels": self.feature_channels,
            "reweight_channels": self.reweight_channels,
            "autoencoder_widths": list(self.autoencoder_widths),
            "weight_max": self.weight_max,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        d = dict(d)
        d["autoencoder_widths"] = tuple(d["autoencoder_widths"])
        return cls(**d)


def zero_upsample(x: torch.Tensor, s: int) -> torch.Tensor:
    """(B, C, h, w) -> (B, C, s*h, s*w) with sources at block top-left corners."""
    b, c, h, w = x.shape
    out = x.new_zeros(b, c, h * s, w * s)
    out[..., ::s, ::s] = x
    return out


def scale_motion(motion: torch.Tensor, s: int) -> torch.Tensor:
    """Nearest-neighbor upsample of a (B, 2, h, w) field, values rescaled by s."""
    return F.interpolate(motion, scale_factor=s, mode="nearest") * s


def backward_warp(img: torch.Tensor, motion: torch.Tensor,
                  validity: torch.Tensor | None = None) -> torch.Tensor:
    """Bilinear gather of img (B,C,H,W) at each pixel + its (du,dv); samples with
    invalid motion or out-of-bounds footprints become zero.

    grid_sample with align_corners=True puts grid extremes on pixel centers,
    matching the pixel-centers-at-integer-coordinates convention of the data.
    """
    b, c, h, w = img.shape
    device = img.device
    ys, xs = torch.meshgrid(torch.arange(h, device=device, dtype=img.dtype),
                            torch.arange(w, device=device, dtype=img.dtype),
                            indexing="ij")
    x = xs.unsqueeze(0) + motion[:, 0]
    y = ys.unsqueeze(0) + motion[:, 1]
    gx = 2.0 * x / max(w - 1, 1) - 1.0
    gy = 2.0 * y / max(h - 1, 1) - 1.0
    grid = torch.stack([gx, gy], dim=-1)
    v = F.grid_sample(img, grid, mode="bilinear", padding_mode="zeros",
                      align_corners=True)
    mask = ((x >= 0) & (x <= w - 1) & (y >= 0) & (y <= h - 1)).unsqueeze(1)
    v = v * mask.to(img.dtype)
    if validity is not None:
        v = v * (validity > 0).to(img.dtype)
    return v


class ResidualBlock(nn.Module):
    """Two 3x3 convolutions, each followed by ReLU; the input joins through a
    1x1 convolution before the final activation."""

    def __init__(self, c_in: int, c_out: int):
        super().__init__()
        self.conv1 = nn.Conv2d(c_in, c_out, 3, padding=1)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=1)
        self.skip = nn.Conv2d(c_in, c_out, 1)

    def forward(self, x):
        h = self.conv2(F.relu(self.conv1(x)))
        return F.relu(h + self.skip(x))


class ReweightingNetwork(nn.Module):
    """3-layer convnet mapping the concatenated (upsampled, warped) input frames
    to one pixel-wise weight map per previous frame, scaled to [0, w_max]."""

    def __init__(self, c_in: int, hidden: int, n_prev: int, w_max: float):
        super().__init__()
        self.w_max = w_max
        self.net = nn.Sequential(
            nn.Conv2d(c_in, hidden, 3, padding=1), nn.ReLU(),
            nn.Conv2d(hidden, hidden, 3, padding=1), nn.ReLU(),
            nn.Conv2d(hidden, n_prev, 3, padding=1))

    def forward(self, x):
        return torch.sigmoid(self.net(x)) * self.w_max


class _DoubleConv(nn.Module):
    def __init__(self, c_in, c_out):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv2d(c_in, c_out, 3, padding=1), nn.ReLU(),
            nn.Conv2d(c_out, c_out, 3, padding=1), nn.ReLU())

    def forward(self, x):
        return self.net(x)


class Autoencoder(nn.Module):
    """Fully convolutional encoder/decoder with concatenation skip connections;
    strided-conv downsampling, nearest-upsample + conv decoding."""

    def __init__(self, c_in: int, widths=(64, 128, 256), c_out: int = 3):
        super().__init__()
        self.enc = nn.ModuleList()
        self.down = nn.ModuleList()
        prev = c_in
        for i, w in enumerate(widths):
            self.enc.append(_DoubleConv(prev, w))
            if i < len(widths) - 1:
                self.down.append(nn.Conv2d(w, widths[i + 1], 3, stride=2, padding=1))
                prev = widths[i + 1]
        self.up = nn.ModuleList()
        self.dec = nn.ModuleList()
        for i in range(len(widths) - 1, 0, -1):
            self.up.append(nn.Conv2d(widths[i], widths[i - 1], 3, padding=1))
            self.dec.append(_DoubleConv(widths[i - 1] * 2, widths[i - 1]))
        self.out = nn.Conv2d(widths[0], c_out, 3, padding=1)

    def forward(self, x):
        skips = []
        for i, enc in enumerate(self.enc):
            x = enc(x)
            if i < len(self.enc) - 1:
                skips.append(x)
                x = self.down[i](x)
        for up, dec, skip in zip(self.up, self.dec, reversed(skips)):
            x = up(F.interpolate(x, scale_factor=2, mode="nearest"))
            x = dec(torch.cat([x, skip], dim=1))
        return self.out(x)


class SRNet(nn.Module):
    def __init__(self, cfg: NetworkConfig):
        super().__init__()
        self.cfg = cfg
        c = cfg.in_channels
        self.features = ResidualBlock(c, cfg.feature_channels)  # shared across time
        self.reweight = ReweightingNetwork(
            c * (cfg.n_prev_frames + 1), cfg.reweight_channels,
            cfg.n_prev_frames, cfg.weight_max)
        self.autoencoder = Autoencoder(
            cfg.feature_channels * (cfg.n_prev_frames + 1), cfg.autoencoder_widths)

    def prepare(self, frames, motions, validity):
        """Zero-upsample current + previous frames/features and warp the previous
        ones; returns (raw frames list, feature maps list, weight maps)."""
        cfg = self.cfg
        b, t, c, h, w = frames.shape
        if t != cfg.n_prev_frames + 1:
            raise ValueError(f"expected {cfg.n_prev_frames + 1} frames, got {t}")
        if c != cfg.in_channels:
            raise ValueError(f"expected {cfg.in_channels} channels, got {c}")
        s = cfg.upsample_factor
        feats = self.features(frames.reshape(b * t, c, h, w)) \
            .reshape(b, t, cfg.feature_channels, h, w)

        raw_up = [zero_upsample(frames[:, 0], s)]
        feat_up = [zero_upsample(feats[:, 0], s)]
        for k in range(1, t):
            m = scale_motion(motions[:, k - 1], s)
            val = F.interpolate(validity[:, k - 1], scale_factor=s, mode="nearest")
            raw_up.append(backward_warp(zero_upsample(frames[:, k], s), m, val))
            feat_up.append(backward_warp(zero_upsample(feats[:, k], s), m, val))
        weights = self.reweight(torch.cat(raw_up, dim=1))
        return raw_up, feat_up, weights

    def forward(self, frames, motions, validity):
        """frames (B, N+1, C, h, w) with index 0 = current; motions/validity
        (B, N, 2|1, h, w); returns (B, 3, s*h, s*w)."""
        _, feat_up, weights = self.prepare(frames, motions, validity)
        fused = [feat_up[0]]
        for k in range(1, len(feat_up)):
            fused.append(feat_up[k] * weights[:, k - 1:k])
        return self.autoencoder(torch.cat(fused, dim=1))


def build_network(cfg: NetworkConfig, seed: int = 0) -> SRNet:
    """Construct an SRNet with seeded initialization."""
    torch.manual_seed(seed)
    return SRNet(cfg)
