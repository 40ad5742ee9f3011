"""On-disk container: a JSON manifest plus raw segment files.

Layout under an asset directory:

    manifest.json
    group_0000/pos_hi.bin
    group_0000/pos_lo.bin
    group_0000/rotation.bin
    ...

Each segment file is the concatenation of its per-channel bitstreams; the
manifest records the per-channel byte lengths so channels split back out
without any framing inside the segment. Groups tile [0, frame_count)
contiguously. Everything is servable by any static HTTP server.

Manifest schema (version "gvv/1"):

    {
      "version": "gvv/1",
      "frame_count": int,
      "group_size": int,                   # nominal, last group may be short
      "groups": [{
         "index", "start_frame", "num_frames", "splat_count", "side",
         "sh_degree",
         "quant": {attr: {"bits": int, "mins": [...], "maxs": [...]}},
         "streams": {name: {"codec", "qp", "lossless", "file",
                            "byte_length", "channel_byte_lengths": [...],
                            "channels": int}}
      }]
    }
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .codec import EncodedGroup, EncodedStream
from .quantize import QuantRange

MANIFEST_VERSION = "gvv/1"
MANIFEST_NAME = "manifest.json"


class ManifestVersionError(ValueError):
    pass


@dataclass
class StreamEntry:
    codec: str
    qp: int | None
    lossless: bool
    file: str
    byte_length: int
    channel_byte_lengths: list[int]
    channels: int


@dataclass
class GroupEntry:
    index: int
    start_frame: int
    num_frames: int
    splat_count: int
    side: int
    sh_degree: int
    quant: dict[str, QuantRange]
    streams: dict[str, StreamEntry]


@dataclass
class Manifest:
    version: str
    frame_count: int
    group_size: int
    groups: list[GroupEntry]

    def group_for_frame(self, frame: int) -> GroupEntry:
        if not 0 <= frame < self.frame_count:
            raise ValueError(f"frame {frame} outside [0, {self.frame_count})")
        for g in self.groups:
            if g.start_frame <= frame < g.start_frame + g.num_frames:
                return g
        raise ValueError(f"no group covers frame {frame}")


def group_dir_name(index: int) -> str:
    return f"group_{index:04d}"


def segment_path(index: int, stream: str) -> str:
    return f"{group_dir_name(index)}/{stream}.bin"


def write_container(groups: list[EncodedGroup], out_dir: str | Path) -> Manifest:
    """Write segments and manifest; returns the manifest written."""
    if not groups:
        raise ValueError("empty group list")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    entries = []
    cursor = 0
    for i, grp in enumerate(groups):
        if grp.start_frame != cursor:
            raise ValueError(
                f"group {i} starts at {grp.start_frame}, expected {cursor} (groups must tile)"
            )
        cursor += grp.num_frames
        gdir = out_dir / group_dir_name(i)
        gdir.mkdir(exist_ok=True)
        streams = {}
        for name, stream in grp.streams.items():
            rel = segment_path(i, name)
            blob = b"".join(stream.channels)
            (out_dir / rel).write_bytes(blob)
            streams[name] = StreamEntry(
                codec=stream.codec,
                qp=stream.qp,
                lossless=stream.lossless,
                file=rel,
                byte_length=len(blob),
                channel_byte_lengths=[len(c) for c in stream.channels],
                channels=len(stream.channels),
            )
        entries.append(
            GroupEntry(
                index=i,
                start_frame=grp.start_frame,
                num_frames=grp.num_frames,
                splat_count=grp.splat_count,
                side=grp.side,
                sh_degree=grp.sh_degree,
                quant=dict(grp.quant),
                streams=streams,
            )
        )

    manifest = Manifest(
        version=MANIFEST_VERSION,
        frame_count=cursor,
        group_size=max(g.num_frames for g in groups),
        groups=entries,
    )
    (out_dir / MANIFEST_NAME).write_text(manifest_to_json(manifest))
    return manifest


def manifest_to_json(manifest: Manifest) -> str:
    doc = {
        "version": manifest.version,
        "frame_count": manifest.frame_count,
        "group_size": manifest.group_size,
        "groups": [
            {
                "index": g.index,
                "start_frame": g.start_frame,
                "num_frames": g.num_frames,
                "splat_count": g.splat_count,
                "side": g.side,
                "sh_degree": g.sh_degree,
                "quant": {
                    name: {"bits": qr.bits, "mins": qr.mins.tolist(), "maxs": qr.maxs.tolist()}
                    for name, qr in g.quant.items()
                },
                "streams": {
                    name: {
                        "codec": s.codec,
                        "qp": s.qp,
                        "lossless": s.lossless,
                        "file": s.file,
                        "byte_length": s.byte_length,
                        "channel_byte_lengths": s.channel_byte_lengths,
                        "channels": s.channels,
                    }
                    for name, s in g.streams.items()
                },
            }
            for g in manifest.groups
        ],
    }
    return json.dumps(doc, indent=2)


def manifest_from_json(text: str) -> Manifest:
    doc = json.loads(text)
    version = doc.get("version")
    if version != MANIFEST_VERSION:
        raise ManifestVersionError(f"manifest version {version!r}, expected {MANIFEST_VERSION!r}")
    groups = []
    for g in doc["groups"]:
        groups.append(
            GroupEntry(
                index=g["index"],
                start_frame=g["start_frame"],
                num_frames=g["num_frames"],
                splat_count=g["splat_count"],
                side=g["side"],
                sh_degree=g["sh_degree"],
                quant={
                    name: QuantRange(mins=q["mins"], maxs=q["maxs"], bits=q["bits"])
                    for name, q in g["quant"].items()
                },
                streams={
                    name: StreamEntry(
                        codec=s["codec"],
                        qp=s["qp"],
                        lossless=s["lossless"],
                        file=s["file"],
                        byte_length=s["byte_length"],
                        channel_byte_lengths=s["channel_byte_lengths"],
                        channels=s["channels"],
                    )
                    for name, s in g["streams"].items()
                },
            )
        )
    groups.sort(key=lambda g: g.index)
    cursor = 0
    for g in groups:
        if g.start_frame != cursor:
            raise ValueError("manifest groups do not tile the frame range")
        cursor += g.num_frames
    if cursor != doc["frame_count"]:
        raise ValueError("frame_count does not match group extents")
    return Manifest(
        version=version,
        frame_count=doc["frame_count"],
        group_size=doc["group_size"],
        groups=groups,
    )


def read_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    return manifest_from_json(path.read_text())


def split_segment(blob: bytes, entry: StreamEntry) -> list[bytes]:
    """Split a segment blob back into per-channel bitstreams."""
    if len(blob) != entry.byte_length:
        raise ValueError(
            f"segment {entry.file}: {len(blob)} bytes on wire, manifest says {entry.byte_length}"
        )
    chunks = []
    offset = 0
    for n in entry.channel_byte_lengths:
        chunks.append(blob[offset : offset + n])
        offset += n
    return chunks


def assemble_group(entry: GroupEntry, segments: dict[str, bytes]) -> EncodedGroup:
    """Build an EncodedGroup from a manifest entry plus raw segment blobs."""
    streams = {}
    for name, s in entry.streams.items():
        if name not in segments:
            raise FileNotFoundError(f"missing segment {s.file}")
        streams[name] = EncodedStream(
            codec=s.codec,
            qp=s.qp,
            lossless=s.lossless,
            channels=split_segment(segments[name], s),
        )
    return EncodedGroup(
        start_frame=entry.start_frame,
        num_frames=entry.num_frames,
        splat_count=entry.splat_count,
        side=entry.side,
        sh_degree=entry.sh_degree,
        streams=streams,
        quant=dict(entry.quant),
    )


def read_group(asset_dir: str | Path, manifest: Manifest, index: int) -> EncodedGroup:
    """Load one group's segments from disk."""
    asset_dir = Path(asset_dir)
    entry = manifest.groups[index]
    segments = {}
    for name, s in entry.streams.items():
        path = asset_dir / s.file
        if not path.exists():
            raise FileNotFoundError(f"missing segment {path}")
        segments[name] = path.read_bytes()
    return assemble_group(entry, segments)
