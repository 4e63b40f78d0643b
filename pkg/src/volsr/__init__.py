"""Direct volume rendering toolkit with temporal reprojection, super-resolution
operators, and LR/HR dataset generation."""

from .camera import CameraState, generate_ray, generate_rays, halton_jitter, project_to_pixel
from .dataset import (CameraPath, SequenceManifest, generate_dataset,
                      generate_sequence, sample_camera_path, split_dataset)
from .errors import DataError, FormatError, UsageError
from .ops import (CharbonnierParams, MotionField, backward_warp, bicubic_upsample,
                  bilinear_sample, charbonnier_loss, psnr, scale_motion, ssim,
                  zero_upsample)
from .render import (FramePacket, LightingParams, RayMarchConfig, RayResult,
                     march_ray, render_frame, shade)
from .reproject import HistoryBuffer, compute_motion, neighborhood_clamp, taa_pass
from .tensorio import read_tensor, write_tensor
from .volume import (ScalarVolume, TransferFunction, gradient_central_diff,
                     load_transfer_function, load_volume, sample_trilinear,
                     save_transfer_function, save_volume, synth_volume, tf_lookup)

__version__ = "0.1.0"
