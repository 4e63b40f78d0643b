"""Sequence rendering and dataset assembly: orbital camera paths, LR feature
frames + motion fields, TAA-accumulated HR ground truth, manifests, and the
train/val/test split.

Low-resolution frames are rendered unjittered with TAA off; the high-resolution
ground truth shares the exact frustum at factor x resolution and accumulates
Halton-jittered frames through the TAA pass. A sequence directory is complete
only once its manifest.json exists (written last).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .camera import CameraState, halton_jitter
from .errors import UsageError
from .ops import MotionField
from .render import RayMarchConfig, render_frame
from .reproject import HistoryBuffer, compute_motion, taa_pass
from .tensorio import write_tensor
from .volume import ScalarVolume, TransferFunction

SPLIT_NAMES = ("train", "val", "test")

FRAME_KEYS = ("lr_color", "lr_quasi_depth", "lr_max_alpha_rgba", "lr_motion",
              "hr_color")


@dataclass(frozen=True)
class CameraPath:
    """Constant-rate orbit around the volume centroid, outside its bounding sphere."""

    center: tuple[float, float, float]
    radius: float
    azimuth_deg: tuple    # per-frame schedule
    elevation_deg: tuple  # per-frame schedule
    up: tuple[float, float, float] = (0.0, 0.0, 1.0)
    fov_y_deg: float = 45.0
    bounding_radius: float = 0.0  # of the volume; fixes near/far planes

    def __post_init__(self):
        if len(self.azimuth_deg) != len(self.elevation_deg):
            raise UsageError("azimuth/elevation schedules differ in length")
        if len(self.azimuth_deg) < 1:
            raise UsageError("camera path needs at least one frame")
        if self.radius <= self.bounding_radius:
            raise UsageError(
                f"orbit radius {self.radius} must exceed the volume bounding-sphere "
                f"radius {self.bounding_radius}")

    @property
    def n_frames(self) -> int:
        return len(self.azimuth_deg)

    @property
    def near(self) -> float:
        return self.radius - self.bounding_radius

    @property
    def far(self) -> float:
        return self.radius + self.bounding_radius

    def position(self, frame: int) -> np.ndarray:
        az = math.radians(self.azimuth_deg[frame])
        el = math.radians(self.elevation_deg[frame])
        offs = np.array([math.cos(el) * math.cos(az),
                         math.cos(el) * math.sin(az),
                         math.sin(el)])
        return np.asarray(self.center, dtype=np.float64) + self.radius * offs

    def camera(self, frame: int, resolution, jitter=(0.0, 0.0)) -> CameraState:
        return CameraState.look_at(
            position=self.position(frame), target=self.center, up=self.up,
            fov_y_deg=self.fov_y_deg, resolution=resolution,
            near=self.near, far=self.far, jitter=jitter)

    def to_dict(self) -> dict:
        return {
            "center": list(self.center), "radius": self.radius,
            "azimuth_deg": list(self.azimuth_deg),
            "elevation_deg": list(self.elevation_deg),
            "up": list(self.up), "fov_y_deg": self.fov_y_deg,
            "bounding_radius": self.bounding_radius,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraPath":
        return cls(center=tuple(d["center"]), radius=d["radius"],
                   azimuth_deg=tuple(d["azimuth_deg"]),
                   elevation_deg=tuple(d["elevation_deg"]), up=tuple(d["up"]),
                   fov_y_deg=d["fov_y_deg"], bounding_radius=d["bounding_radius"])


def sample_camera_path(seed, volume: ScalarVolume, n_frames: int,
                       params: dict | None = None) -> CameraPath:
    """Deterministic orbit: start pose drawn area-uniformly on an elevation band,
    then constant angular velocity in azimuth so consecutive frames overlap."""
    if n_frames < 1:
        raise UsageError(f"n_frames must be >= 1, got {n_frames}")
    params = params or {}
    radius_factor = float(params.get("radius_factor", 1.8))
    ang_vel = float(params.get("angular_velocity_deg", 0.9))
    max_el = math.radians(float(params.get("max_start_elevation_deg", 60.0)))
    fov = float(params.get("fov_y_deg", 45.0))

    rng = np.random.default_rng(seed)
    az0 = float(rng.uniform(0.0, 360.0))
    el0 = math.degrees(math.asin(float(rng.uniform(-math.sin(max_el),
                                                   math.sin(max_el)))))
    az = tuple(az0 + i * ang_vel for i in range(n_frames))
    el = (el0,) * n_frames
    bsr = volume.bounding_sphere_radius
    return CameraPath(center=tuple(float(c) for c in volume.center),
                      radius=radius_factor * bsr, azimuth_deg=az,
                      elevation_deg=el, fov_y_deg=fov, bounding_radius=bsr)


@dataclass
class SequenceManifest:
    """Everything needed to reload one rendered video sequence from disk."""

    scene_id: str
    sequence_id: str
    seed: int
    n_frames: int
    lr_resolution: tuple[int, int]  # (W, H)
    hr_resolution: tuple[int, int]
    upsample_factor: int
    frames: list = field(default_factory=list)  # dicts with FRAME_KEYS paths
    camera_path: dict = field(default_factory=dict)
    split: str = "train"

    def __post_init__(self):
        if self.n_frames < 1:
            raise UsageError(f"n_frames must be >= 1, got {self.n_frames}")
        lw, lh = self.lr_resolution
        hw, hh = self.hr_resolution
        s = self.upsample_factor
        if (hw, hh) != (lw * s, lh * s):
            raise UsageError(
                f"hr_resolution {self.hr_resolution} != factor {s} x "
                f"lr_resolution {self.lr_resolution}")

    def to_dict(self) -> dict:
        return {
            "scene_id": self.scene_id, "sequence_id": self.sequence_id,
            "seed": self.seed, "n_frames": self.n_frames,
            "lr_resolution": list(self.lr_resolution),
            "hr_resolution": list(self.hr_resolution),
            "upsample_factor": self.upsample_factor, "frames": self.frames,
            "camera_path": self.camera_path, "split": self.split,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SequenceManifest":
        return cls(scene_id=d["scene_id"], sequence_id=d["sequence_id"],
                   seed=d["seed"], n_frames=d["n_frames"],
                   lr_resolution=tuple(d["lr_resolution"]),
                   hr_resolution=tuple(d["hr_resolution"]),
                   upsample_factor=d["upsample_factor"], frames=d["frames"],
                   camera_path=d["camera_path"], split=d["split"])

    @classmethod
    def load(cls, path) -> "SequenceManifest":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def motion_to_raster(motion: MotionField) -> np.ndarray:
    """Pack a MotionField into one (H, W, 3) raster: du, dv, validity."""
    return np.concatenate([motion.motion, motion.validity], axis=2)


def raster_to_motion(raster: np.ndarray) -> MotionField:
    return MotionField(raster[..., :2].copy(), raster[..., 2:3].copy())


def generate_sequence(volume: ScalarVolume, tf: TransferFunction,
                      path: CameraPath, out_dir, *, scene_id: str,
                      sequence_id: str, seed: int, lr_resolution,
                      upsample_factor: int,
                      render_cfg: RayMarchConfig | None = None,
                      taa_blend: float = 0.1) -> SequenceManifest:
    """Render one sequence to out_dir: per frame the LR feature packet + motion
    field and the TAA-accumulated HR color. The manifest is written last, so a
    directory without manifest.json is incomplete; on failure the marker is
    removed."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = out_dir / "manifest.json"
    manifest_path.unlink(missing_ok=True)

    lw, lh = (int(x) for x in lr_resolution)
    s = int(upsample_factor)
    cfg = render_cfg or RayMarchConfig()

    manifest = SequenceManifest(
        scene_id=scene_id, sequence_id=sequence_id, seed=seed,
        n_frames=path.n_frames, lr_resolution=(lw, lh),
        hr_resolution=(lw * s, lh * s), upsample_factor=s,
        camera_path=path.to_dict())

    try:
        hist = HistoryBuffer.empty()
        cam_lr_prev = None
        cam_hr_prev = None
        for i in range(path.n_frames):
            cam_lr = path.camera(i, (lw, lh))
            lr_packet = render_frame(volume, tf, cam_lr, cfg)
            if cam_lr_prev is None:
                motion = MotionField.zero(lw, lh, validity=lr_packet.coverage)
            else:
                motion = compute_motion(lr_packet, cam_lr_prev, cam_lr)

            cam_hr = path.camera(i, (lw * s, lh * s), jitter=halton_jitter(i))
            hr_packet = render_frame(volume, tf, cam_hr, cfg)
            hr_motion = compute_motion(hr_packet, cam_hr_prev or cam_hr, cam_hr)
            hr_color, hist = taa_pass(hr_packet, hist, hr_motion, taa_blend)

            rec = {}
            tensors = {
                "lr_color": lr_packet.color,
                "lr_quasi_depth": lr_packet.quasi_depth,
                "lr_max_alpha_rgba": lr_packet.max_alpha_rgba,
                "lr_motion": motion_to_raster(motion),
                "hr_color": hr_color,
            }
            for key, arr in tensors.items():
                name = f"frame{i:04d}_{key}.vsrt"
                write_tensor(out_dir / name, arr)
                rec[key] = name
            manifest.frames.append(rec)
            cam_lr_prev = cam_lr
            cam_hr_prev = cam_hr
        manifest.save(manifest_path)
    except BaseException:
        manifest_path.unlink(missing_ok=True)
        raise
    return manifest


def _split_counts(n: int, ratios) -> list[int]:
    # floor each class, then hand the remainder out train-first
    floors = [int(math.floor(r * n)) for r in ratios]
    rem = n - sum(floors)
    k = 0
    while rem > 0:
        floors[k % len(floors)] += 1
        k += 1
        rem -= 1
    return floors


def split_dataset(manifests, ratios=(0.8, 0.1, 0.1), seed: int = 0) -> list[str]:
    """Assign train/val/test at sequence granularity, stratified per scene,
    deterministic in seed. Returns one split name per manifest (input order)."""
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != len(SPLIT_NAMES):
        raise UsageError(f"expected {len(SPLIT_NAMES)} ratios, got {len(ratios)}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise UsageError(f"ratios must sum to 1, got {ratios}")
    manifests = list(manifests)
    scenes: dict[str, list[int]] = {}
    for idx, m in enumerate(manifests):
        scenes.setdefault(m.scene_id, []).append(idx)

    rng = np.random.default_rng(seed)
    out = [None] * len(manifests)
    for scene_id in sorted(scenes):
        idxs = scenes[scene_id]
        if len(idxs) < len(SPLIT_NAMES):
            raise UsageError(
                f"scene '{scene_id}' has {len(idxs)} sequences, fewer than "
                f"{len(SPLIT_NAMES)} split classes")
        order = rng.permutation(len(idxs))
        counts = _split_counts(len(idxs), ratios)
        pos = 0
        for name, cnt in zip(SPLIT_NAMES, counts):
            for k in order[pos:pos + cnt]:
                out[idxs[int(k)]] = name
            pos += cnt
    return out


def generate_dataset(volume: ScalarVolume, tf: TransferFunction, out_dir, *,
                     scene_id: str, n_sequences: int, n_frames: int,
                     lr_resolution, upsample_factor: int, seed: int,
                     ratios=(0.8, 0.1, 0.1), path_params: dict | None = None,
                     render_cfg: RayMarchConfig | None = None,
                     taa_blend: float = 0.1) -> list[SequenceManifest]:
    """Render n_sequences orbit videos of one scene and split them; writes
    index.json listing every sequence directory and its split."""
    if n_sequences < 1:
        raise UsageError(f"n_sequences must be >= 1, got {n_sequences}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    manifests = []
    for sq in range(n_sequences):
        path = sample_camera_path([seed, sq], volume, n_frames, path_params)
        seq_id = f"seq{sq:03d}"
        manifests.append(generate_sequence(
            volume, tf, path, out_dir / seq_id, scene_id=scene_id,
            sequence_id=seq_id, seed=seed, lr_resolution=lr_resolution,
            upsample_factor=upsample_factor, render_cfg=render_cfg,
            taa_blend=taa_blend))

    for m, split in zip(manifests, split_dataset(manifests, ratios, seed)):
        m.split = split
        m.save(out_dir / m.sequence_id / "manifest.json")

    index = {
        "scene_id": scene_id, "seed": seed, "n_sequences": n_sequences,
        "sequences": [
            {"dir": m.sequence_id, "split": m.split} for m in manifests],
    }
    (out_dir / "index.json").write_text(
        json.dumps(index, indent=2, sort_keys=True) + "\n")
    return manifests
