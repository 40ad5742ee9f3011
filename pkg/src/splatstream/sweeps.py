"""Rate-distortion and group-size sweep reports.

Every measurement goes through the real pipeline — pack, encode, decode,
unpack, render — never through shortcuts, so the numbers reflect what a
client would actually decode. Results are small row lists that serialize
to CSV with fixed headers.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .camera import Camera
from .codec import CodecConfig, decode_group, encode_group
from .frames import GaussianFrame
from .packing import pack_group, unpack_frame
from .render import psnr, render

RD_HEADER = ("qp", "kb_per_frame", "psnr_db")
ABLATION_HEADER = ("group_size", "kb_per_frame")
LOSSLESS_LABEL = "lossless"


@dataclass
class RdPoint:
    qp: int | str  # numeric QP, or the lossless label
    kb_per_frame: float
    psnr_db: float


@dataclass
class AblationPoint:
    group_size: int
    kb_per_frame: float


def _encode_sequence(frames, group_size, codec):
    """Pack+encode all groups; returns (encoded groups, packed stacks)."""
    stacks = []
    cursor = 0
    for i in range(0, len(frames), group_size):
        stack = pack_group(frames[i : i + group_size])
        stack.start_frame = cursor
        cursor += stack.num_frames
        stacks.append(stack)
    return [encode_group(s, codec) for s in stacks], stacks


def _mean_decoded_psnr(frames, encoded, cameras, sh_degree=0) -> float:
    """Mean rendered PSNR of the decode path against the source frames."""
    references = {}
    scores = []
    t = 0
    for enc in encoded:
        stack = decode_group(enc)
        for local in range(stack.num_frames):
            decoded = unpack_frame(stack, local)
            for ci, cam in enumerate(cameras):
                key = (t, ci)
                if key not in references:
                    references[key] = render(frames[t], cam, sh_degree)
                scores.append(psnr(render(decoded, cam, sh_degree), references[key]))
            t += 1
    return float(np.mean(scores))


def rate_distortion_sweep(
    frames: list[GaussianFrame],
    qps: list[int],
    cameras: list[Camera],
    group_size: int = 20,
    include_lossless: bool = True,
    sh_degree: int = 0,
) -> list[RdPoint]:
    """One row per operating point: per-frame size and mean rendered PSNR.

    The lossless row uses the internal backend (codec adds no loss, so its
    PSNR is the pure quantization PSNR); numeric QPs use the external H.264
    backend and require the encoder binary.
    """
    if not cameras:
        raise ValueError("need at least one camera")
    if not frames:
        raise ValueError("need at least one frame")
    if not include_lossless and not qps:
        raise ValueError("sweep has no operating points")
    rows = []
    if include_lossless:
        encoded, _ = _encode_sequence(frames, group_size, CodecConfig(backend="lossless-internal"))
        rows.append(
            RdPoint(
                qp=LOSSLESS_LABEL,
                kb_per_frame=sum(e.total_bytes for e in encoded) / len(frames) / 1024,
                psnr_db=_mean_decoded_psnr(frames, encoded, cameras, sh_degree),
            )
        )
    for qp in qps:
        codec = CodecConfig(backend="h264-external", base_qp=qp, gop=group_size)
        encoded, _ = _encode_sequence(frames, group_size, codec)
        rows.append(
            RdPoint(
                qp=int(qp),
                kb_per_frame=sum(e.total_bytes for e in encoded) / len(frames) / 1024,
                psnr_db=_mean_decoded_psnr(frames, encoded, cameras, sh_degree),
            )
        )
    return rows


def group_size_ablation(
    frames: list[GaussianFrame],
    sizes=(10, 15, 20, 25, 30),
    codec: CodecConfig | None = None,
) -> list[AblationPoint]:
    """Per-frame encoded size as a function of group size, same content."""
    codec = codec or CodecConfig()
    rows = []
    for size in sizes:
        encoded, _ = _encode_sequence(frames, size, codec)
        rows.append(
            AblationPoint(
                group_size=int(size),
                kb_per_frame=sum(e.total_bytes for e in encoded) / len(frames) / 1024,
            )
        )
    return rows


def write_rd_csv(rows: list[RdPoint], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RD_HEADER)
        for row in rows:
            writer.writerow([row.qp, f"{row.kb_per_frame:.3f}", f"{row.psnr_db:.3f}"])


def write_ablation_csv(rows: list[AblationPoint], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ABLATION_HEADER)
        for row in rows:
            writer.writerow([row.group_size, f"{row.kb_per_frame:.3f}"])


def read_csv_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
