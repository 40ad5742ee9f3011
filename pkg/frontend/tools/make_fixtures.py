#!/usr/bin/env python3
"""Generate shared test fixtures for the viewer from the Python toolchain.

Everything under frontend/fixtures/ is derived: two baked assets, the
reference reconstructions the TypeScript side must match, and one raw
codec round-trip case. Re-run after any encoder change; the directory is
gitignored and `npm run fixtures` rebuilds it.
"""
from __future__ import annotations

import base64
import json
from pathlib import Path

import numpy as np

from splatstream.bake import bake_frames
from splatstream.codec import decode_group, deflate_encode
from splatstream.container import read_group, read_manifest
from splatstream.packing import unpack_frame
from splatstream.synthetic import smooth_motion_sequence

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"


def dump_frame(out_dir: Path, frame) -> None:
    """Write one reconstructed frame as little-endian float64 blobs."""
    out_dir.mkdir(parents=True, exist_ok=True)
    attrs = {
        "positions": frame.positions,
        "rotations": frame.rotations,
        "log_scales": frame.log_scales,
        "opacities": frame.opacities,
        "colors": frame.colors,
        "sh": frame.sh,
    }
    meta = {"count": frame.splat_count, "shChannels": int(frame.sh.shape[1])}
    for name, arr in attrs.items():
        data = np.ascontiguousarray(arr, dtype="<f8")
        (out_dir / f"{name}.f64").write_bytes(data.tobytes())
        meta[f"{name}_shape"] = list(arr.shape)
    (out_dir / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")


def make_asset(
    name: str,
    n: int,
    num_frames: int,
    group_size: int,
    sh_degree: int,
    seed: int,
    expected_frames: list[int],
) -> None:
    asset_dir = FIXTURES / name
    frames = smooth_motion_sequence(n, num_frames, seed=seed, sh_degree=sh_degree)
    manifest, report = bake_frames(frames, asset_dir, group_size=group_size)
    print(f"{name}: {report.summary()}")

    manifest = read_manifest(asset_dir)
    stacks: dict[int, object] = {}
    for frame_index in expected_frames:
        entry = next(
            g
            for g in manifest.groups
            if g.start_frame <= frame_index < g.start_frame + g.num_frames
        )
        if entry.index not in stacks:
            stacks[entry.index] = decode_group(read_group(asset_dir, manifest, entry.index))
        frame = unpack_frame(stacks[entry.index], frame_index - entry.start_frame)
        dump_frame(FIXTURES / "expected" / name / f"frame_{frame_index:04d}", frame)


def make_codec_case() -> None:
    """One temporally coherent uint8 plane sequence and its bitstream."""
    rng = np.random.default_rng(11)
    num_frames, side = 5, 16
    planes = np.empty((num_frames, side, side), dtype=np.uint8)
    planes[0] = rng.integers(0, 256, size=(side, side), dtype=np.uint8)
    for t in range(1, num_frames):
        step = rng.integers(-3, 4, size=(side, side)).astype(np.uint8)
        planes[t] = planes[t - 1] + step  # wraparound on purpose
    encoded = deflate_encode(planes)
    case = {
        "num_frames": num_frames,
        "side": side,
        "encoded": base64.b64encode(encoded).decode("ascii"),
        "raw": base64.b64encode(planes.tobytes()).decode("ascii"),
    }
    (FIXTURES / "codec_case.json").write_text(json.dumps(case, indent=2) + "\n")
    print(f"codec_case: {len(encoded)} encoded bytes for {planes.nbytes} raw")


def main() -> None:
    FIXTURES.mkdir(exist_ok=True)
    make_asset(
        "asset_small",
        n=120,
        num_frames=6,
        group_size=4,
        sh_degree=1,
        seed=7,
        expected_frames=[0, 3, 5],
    )
    make_asset(
        "asset_play",
        n=10_000,
        num_frames=40,
        group_size=20,
        sh_degree=0,
        seed=3,
        expected_frames=[0, 25],
    )
    make_codec_case()


if __name__ == "__main__":
    main()
