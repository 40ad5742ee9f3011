"""Encode/decode plane stacks as per-attribute video bitstreams.

Two backends share one contract (a codec is a pair encode/decode over 8-bit
monochrome plane sequences):

* ``lossless-internal``: per-channel wraparound delta between consecutive
  frames, deflate-compressed at a fixed level. Deterministic and bit-exact
  invertible; used in CI so tests never depend on codec binaries.
* ``h264-external``: shells out to an external H.264 encoder (ffmpeg-style
  CLI, path overridable via the SPLATSTREAM_FFMPEG environment variable),
  one elementary stream per channel, fixed QP, closed GOP per group so every
  group decodes on its own.

Positions are split into hi/lo byte planes before encoding; the hi plane is
always carried by the lossless backend regardless of configuration, and the
QP threshold policy caps color/scale/rotation at QP 22 once the base QP
exceeds it.
"""
from __future__ import annotations

import os
import shutil
import subprocess
import zlib
from dataclasses import dataclass, field

import numpy as np

from .layout import attribute_layout
from .packing import PlaneStack
from .quantize import QuantRange, merge_u16, split_u16

BACKENDS = ("lossless-internal", "h264-external")
QP_THRESHOLD = 22
QP_CAPPED_ATTRS = ("color", "scale", "rotation")
DEFLATE_LEVEL = 6
FFMPEG_ENV = "SPLATSTREAM_FFMPEG"

CODEC_DEFLATE = "deflate-delta"
CODEC_H264 = "h264"

# stream name -> (source attribute, role); position contributes two byte streams
STREAM_SOURCES = {
    "pos_hi": ("position", "hi"),
    "pos_lo": ("position", "lo"),
    "rotation": ("rotation", None),
    "scale": ("scale", None),
    "opacity": ("opacity", None),
    "color": ("color", None),
    "sh": ("sh", None),
}


class EncoderError(RuntimeError):
    """External encoder/decoder process failure, with its diagnostics."""


@dataclass(frozen=True)
class CodecConfig:
    backend: str = "lossless-internal"
    base_qp: int = 22
    gop: int = 20

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}")
        if not 0 <= self.base_qp <= 51:
            raise ValueError("base_qp must be in [0, 51]")
        if self.gop < 1:
            raise ValueError("gop must be >= 1")


@dataclass
class EncodedStream:
    codec: str
    qp: int | None  # None marks a lossless stream
    lossless: bool
    channels: list[bytes]  # one bitstream per channel

    @property
    def byte_length(self) -> int:
        return sum(len(c) for c in self.channels)


@dataclass
class EncodedGroup:
    start_frame: int
    num_frames: int
    splat_count: int
    side: int
    sh_degree: int
    streams: dict[str, EncodedStream]
    quant: dict[str, QuantRange] = field(default_factory=dict)

    @property
    def total_bytes(self) -> int:
        return sum(s.byte_length for s in self.streams.values())


def qp_policy(base_qp: int) -> dict[str, int | None]:
    """Per-stream QP map. At or below the threshold every stream shares the
    base QP; above it, color/scale/rotation stay pinned at the threshold
    while the rest keep climbing. pos_hi is always lossless (None)."""
    if not 0 <= base_qp <= 51:
        raise ValueError("base_qp must be in [0, 51]")
    policy: dict[str, int | None] = {}
    for name, (attr, role) in STREAM_SOURCES.items():
        if role == "hi":
            policy[name] = None
        elif base_qp > QP_THRESHOLD and attr in QP_CAPPED_ATTRS:
            policy[name] = QP_THRESHOLD
        else:
            policy[name] = base_qp
    return policy


# --- lossless-internal backend -------------------------------------------


def deflate_encode(planes: np.ndarray) -> bytes:
    """Encode a (T, H, W) uint8 sequence: frame 0 raw, then wraparound
    deltas to the previous frame, deflate-compressed."""
    if planes.dtype != np.uint8:
        raise ValueError("lossless backend expects uint8 planes")
    delta = planes.copy()
    delta[1:] = planes[1:] - planes[:-1]  # uint8 wraparound
    return zlib.compress(delta.tobytes(), DEFLATE_LEVEL)


def deflate_decode(data: bytes, num_frames: int, side: int) -> np.ndarray:
    raw = zlib.decompress(data)
    expected = num_frames * side * side
    if len(raw) != expected:
        raise ValueError(f"bitstream decodes to {len(raw)} bytes, expected {expected}")
    delta = np.frombuffer(raw, dtype=np.uint8).reshape(num_frames, side, side)
    return np.cumsum(delta, axis=0, dtype=np.uint8)


# --- h264-external backend ------------------------------------------------


def ffmpeg_path() -> str:
    return os.environ.get(FFMPEG_ENV, "ffmpeg")


def h264_available() -> bool:
    return shutil.which(ffmpeg_path()) is not None


def _run(cmd: list[str], stdin: bytes) -> bytes:
    proc = subprocess.run(cmd, input=stdin, stdout=subprocess.PIPE, stderr=subprocess.PIPE)
    if proc.returncode != 0:
        raise EncoderError(
            f"{cmd[0]} failed with code {proc.returncode}:\n{proc.stderr.decode(errors='replace')}"
        )
    return proc.stdout


def h264_encode(planes: np.ndarray, qp: int, gop: int) -> bytes:
    """Encode a (T, H, W) uint8 sequence to an H.264 elementary stream with
    fixed QP and a closed GOP covering the whole group (first frame intra)."""
    if not h264_available():
        raise EncoderError(f"external encoder {ffmpeg_path()!r} not found")
    t, h, w = planes.shape
    cmd = [
        ffmpeg_path(),
        "-hide_banner", "-loglevel", "error",
        "-f", "rawvideo", "-pix_fmt", "gray", "-s", f"{w}x{h}", "-r", "30",
        "-i", "pipe:0",
        "-an",
        "-c:v", "libx264",
        "-qp", str(qp),
        "-g", str(gop), "-keyint_min", str(gop), "-sc_threshold", "0",
        "-pix_fmt", "yuv420p",
        "-f", "h264", "pipe:1",
    ]
    return _run(cmd, planes.tobytes())


def h264_decode(data: bytes, num_frames: int, side: int) -> np.ndarray:
    if not h264_available():
        raise EncoderError(f"external decoder {ffmpeg_path()!r} not found")
    cmd = [
        ffmpeg_path(),
        "-hide_banner", "-loglevel", "error",
        "-f", "h264", "-i", "pipe:0",
        "-f", "rawvideo", "-pix_fmt", "gray", "pipe:1",
    ]
    raw = _run(cmd, data)
    expected = num_frames * side * side
    if len(raw) < expected:
        raise ValueError(f"decoded {len(raw)} bytes, expected {expected}")
    return np.frombuffer(raw[:expected], dtype=np.uint8).reshape(num_frames, side, side)


# --- group encode/decode --------------------------------------------------


def _byte_planes(stack: PlaneStack, name: str) -> np.ndarray:
    """8-bit (T, C, H, W) planes for a stream name, splitting position."""
    attr, role = STREAM_SOURCES[name]
    planes = stack.planes[attr]
    if role is None:
        return planes
    hi, lo = split_u16(planes)
    return hi if role == "hi" else lo


def encode_group(stack: PlaneStack, cfg: CodecConfig) -> EncodedGroup:
    """One bitstream per attribute channel; pos_hi stays lossless under
    every configuration."""
    policy = qp_policy(cfg.base_qp)
    streams: dict[str, EncodedStream] = {}
    for name in STREAM_SOURCES:
        attr, _ = STREAM_SOURCES[name]
        if attr not in stack.planes:
            continue
        planes = _byte_planes(stack, name)
        if planes.shape[1] == 0:
            continue
        qp = policy[name]
        lossless = cfg.backend == "lossless-internal" or qp is None
        channels = []
        for c in range(planes.shape[1]):
            if lossless:
                channels.append(deflate_encode(planes[:, c]))
            else:
                channels.append(h264_encode(planes[:, c], qp, cfg.gop))
        streams[name] = EncodedStream(
            codec=CODEC_DEFLATE if lossless else CODEC_H264,
            qp=None if lossless else qp,
            lossless=lossless,
            channels=channels,
        )
    return EncodedGroup(
        start_frame=stack.start_frame,
        num_frames=stack.num_frames,
        splat_count=stack.splat_count,
        side=stack.side,
        sh_degree=stack.layout.sh_degree,
        streams=streams,
        quant=dict(stack.quant),
    )


def _decode_stream(stream: EncodedStream, num_frames: int, side: int) -> np.ndarray:
    channels = []
    for data in stream.channels:
        if stream.codec == CODEC_DEFLATE:
            channels.append(deflate_decode(data, num_frames, side))
        elif stream.codec == CODEC_H264:
            channels.append(h264_decode(data, num_frames, side))
        else:
            raise ValueError(f"unknown codec id {stream.codec!r}")
    return np.stack(channels, axis=1)  # (T, C, H, W)


def decode_group(enc: EncodedGroup, entry=None) -> PlaneStack:
    """Rebuild the plane stack from a group's bitstreams; needs nothing from
    any other group. An optional manifest group entry cross-checks geometry."""
    if entry is not None:
        for attr in ("side", "num_frames", "splat_count"):
            if getattr(entry, attr) != getattr(enc, attr):
                raise ValueError(
                    f"{attr} mismatch vs manifest: {getattr(enc, attr)} != {getattr(entry, attr)}"
                )
    planes: dict[str, np.ndarray] = {}
    decoded: dict[str, np.ndarray] = {}
    for name, stream in enc.streams.items():
        decoded[name] = _decode_stream(stream, enc.num_frames, enc.side)
    if "pos_hi" in decoded:
        planes["position"] = merge_u16(decoded.pop("pos_hi"), decoded.pop("pos_lo"))
    for name, arr in decoded.items():
        planes[name] = arr
    return PlaneStack(
        side=enc.side,
        splat_count=enc.splat_count,
        planes=planes,
        quant=dict(enc.quant),
        layout=attribute_layout(enc.sh_degree),
        permutation=None,
        start_frame=enc.start_frame,
    )
