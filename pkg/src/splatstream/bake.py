"""Bake a splat-frame sequence into an encoded container on disk.

Per group of frames (default 20): prune the keyframe's lowest-opacity
splats down to the target count and apply the surviving-index mask to every
frame of the group (counts stay constant inside a group and may only change
at group boundaries), Morton-sort by the keyframe positions, quantize and
pack into plane stacks, encode each attribute stream, then write the
segment files plus manifest.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

from .codec import CodecConfig, encode_group
from .container import Manifest, write_container
from .frames import GaussianFrame
from .motion import PRUNE_RATIO, PRUNE_TARGET, prune_survivors
from .packing import pack_group
from .splatio import FRAME_SUFFIXES, load_frame

DEFAULT_GROUP_SIZE = 20


@dataclass
class BakeReport:
    frame_count: int
    group_count: int
    splat_counts: list[int]
    total_bytes: int
    elapsed_seconds: float
    group_seconds: list[float] = field(default_factory=list)

    @property
    def seconds_per_frame(self) -> float:
        return self.elapsed_seconds / max(self.frame_count, 1)

    @property
    def bytes_per_frame(self) -> float:
        return self.total_bytes / max(self.frame_count, 1)

    def summary(self) -> str:
        return (
            f"baked {self.frame_count} frames in {self.group_count} groups: "
            f"{self.total_bytes / 1024:.1f} KiB total, "
            f"{self.bytes_per_frame / 1024:.2f} KiB/frame, "
            f"{self.elapsed_seconds:.2f} s ({self.seconds_per_frame * 1000:.0f} ms/frame)"
        )


def split_groups(frames: list[GaussianFrame], group_size: int) -> list[list[GaussianFrame]]:
    if group_size < 1:
        raise ValueError("group_size must be >= 1")
    if not frames:
        raise ValueError("no frames to bake")
    return [frames[i : i + group_size] for i in range(0, len(frames), group_size)]


def bake_frames(
    frames: list[GaussianFrame],
    out_dir: str | Path,
    group_size: int = DEFAULT_GROUP_SIZE,
    codec: CodecConfig | None = None,
    prune_ratio: float = PRUNE_RATIO,
    target_count: int = PRUNE_TARGET,
) -> tuple[Manifest, BakeReport]:
    codec = codec or CodecConfig()
    start = time.perf_counter()
    encoded = []
    counts = []
    group_seconds = []
    cursor = 0
    for group in split_groups(frames, group_size):
        t0 = time.perf_counter()
        sizes = {f.splat_count for f in group}
        if len(sizes) != 1:
            raise ValueError(
                f"splat count changes inside a group ({sorted(sizes)}); "
                "counts may only change at group boundaries"
            )
        keyframe = group[0]
        rounds = prune_survivors(keyframe.opacities, ratio=prune_ratio, target_count=target_count)
        if rounds:
            kept = rounds[-1]
            group = [f.select(kept) for f in group]
        # renumber so groups tile the output timeline contiguously
        stack = pack_group(group)
        stack.start_frame = cursor
        cursor += stack.num_frames
        encoded.append(encode_group(stack, codec))
        counts.append(group[0].splat_count)
        group_seconds.append(time.perf_counter() - t0)

    manifest = write_container(encoded, out_dir)
    report = BakeReport(
        frame_count=len(frames),
        group_count=len(encoded),
        splat_counts=counts,
        total_bytes=sum(g.total_bytes for g in encoded),
        elapsed_seconds=time.perf_counter() - start,
        group_seconds=group_seconds,
    )
    return manifest, report


def find_frame_files(input_dir: str | Path) -> list[Path]:
    input_dir = Path(input_dir)
    files = sorted(p for p in input_dir.iterdir() if p.suffix.lower() in FRAME_SUFFIXES)
    if not files:
        raise FileNotFoundError(f"no splat frame files ({'/'.join(FRAME_SUFFIXES)}) in {input_dir}")
    return files


def bake_directory(
    input_dir: str | Path,
    out_dir: str | Path,
    group_size: int = DEFAULT_GROUP_SIZE,
    codec: CodecConfig | None = None,
    prune_ratio: float = PRUNE_RATIO,
    target_count: int = PRUNE_TARGET,
) -> tuple[Manifest, BakeReport]:
    """Bake every frame file in a directory, in sorted filename order."""
    frames = []
    for i, path in enumerate(find_frame_files(input_dir)):
        frame = load_frame(path)
        frame.frame_index = i
        frames.append(frame)
    return bake_frames(
        frames,
        out_dir,
        group_size=group_size,
        codec=codec,
        prune_ratio=prune_ratio,
        target_count=target_count,
    )
