"""splatstream: dynamic Gaussian-splat sequences as streamable 2D videos.

The pipeline in one breath: per-frame splat clouds are Morton-sorted,
quantized per attribute, packed into square image planes, delta-compressed
per frame group into a manifest + segment container, served over plain
HTTP, and reconstructed by a three-stage (fetch/decode/reconstruct)
player.  Alongside it live the compression-aware training losses and a
multiresolution hash-grid motion estimator.

Import from the submodules for the full surface; the names re-exported
here cover the common end-to-end path.
"""
from .bake import BakeReport, bake_directory, bake_frames
from .camera import Camera, load_camera, look_at, make_camera, orbit, save_camera
from .codec import CodecConfig, decode_group, encode_group
from .container import Manifest, read_group, read_manifest
from .frames import Bbox, GaussianFrame
from .motion import (
    HashGridConfig,
    MotionField,
    fit_motion,
    load_motion_field,
    predict_delta,
    prune_keyframe,
    save_motion_field,
)
from .packing import PlaneStack, pack_group, unpack_frame
from .player import EndOfStream, PlaySession, Stalled
from .quantize import QuantRange
from .regularizers import (
    EntropyModel,
    combine_losses,
    entropy_loss,
    residual_quantize,
    temporal_loss,
)
from .render import ImageBuffer, psnr, render
from .server import ServeConfig, serve
from .splatio import load_frame, save_frame
from .sweeps import group_size_ablation, rate_distortion_sweep

__version__ = "0.1.0"

__all__ = [
    "BakeReport",
    "Bbox",
    "Camera",
    "CodecConfig",
    "EndOfStream",
    "EntropyModel",
    "GaussianFrame",
    "HashGridConfig",
    "ImageBuffer",
    "Manifest",
    "MotionField",
    "PlaneStack",
    "PlaySession",
    "QuantRange",
    "ServeConfig",
    "Stalled",
    "bake_directory",
    "bake_frames",
    "combine_losses",
    "decode_group",
    "encode_group",
    "entropy_loss",
    "fit_motion",
    "group_size_ablation",
    "load_camera",
    "load_frame",
    "load_motion_field",
    "look_at",
    "make_camera",
    "orbit",
    "pack_group",
    "predict_delta",
    "prune_keyframe",
    "psnr",
    "rate_distortion_sweep",
    "read_group",
    "read_manifest",
    "render",
    "residual_quantize",
    "save_camera",
    "save_frame",
    "save_motion_field",
    "serve",
    "temporal_loss",
    "unpack_frame",
    "__version__",
]
