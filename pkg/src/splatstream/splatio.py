"""Splat cloud file I/O.

Two formats:

* The de-facto binary splat PLY: ``binary_little_endian`` vertex records of
  x y z, nx ny nz (ignored), f_dc_0..2, f_rest_0..3k-1, opacity, scale_0..2,
  rot_0..3. Conversions into frame storage: color = 0.5 + C0 * f_dc,
  opacity = sigmoid(raw), rotation normalized; scale is already log-domain
  and f_rest is kept as-is (channel-major: all R coefficients, then G, then
  B).

* An npz debug format with keys positions, rotations, log_scales,
  opacities, colors, sh, frame_index holding the frame arrays verbatim.
"""
from __future__ import annotations

import re
from pathlib import Path

import numpy as np
from scipy.special import expit, logit

from .frames import GaussianFrame
from .layout import sh_coefficient_count
from .packing import LOGIT_CLAMP

SH_C0 = 0.28209479177387814


def _ply_property_names(sh_degree: int) -> list[str]:
    names = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
    names += [f"f_rest_{i}" for i in range(sh_coefficient_count(sh_degree))]
    names += ["opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"]
    return names


def write_splat_ply(frame: GaussianFrame, path: str | Path) -> None:
    path = Path(path)
    names = _ply_property_names(frame.sh_degree)
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {frame.splat_count}"]
    header += [f"property float {n}" for n in names]
    header.append("end_header")

    n = frame.splat_count
    rec = np.zeros(n, dtype=[(name, "<f4") for name in names])
    rec["x"], rec["y"], rec["z"] = frame.positions.T
    f_dc = (frame.colors - 0.5) / SH_C0
    rec["f_dc_0"], rec["f_dc_1"], rec["f_dc_2"] = f_dc.T
    for i in range(frame.sh.shape[1]):
        rec[f"f_rest_{i}"] = frame.sh[:, i]
    rec["opacity"] = np.clip(logit(frame.opacities), -LOGIT_CLAMP, LOGIT_CLAMP)
    for i in range(3):
        rec[f"scale_{i}"] = frame.log_scales[:, i]
    for i in range(4):
        rec[f"rot_{i}"] = frame.rotations[:, i]

    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        f.write(rec.tobytes())


def read_splat_ply(path: str | Path, frame_index: int = 0) -> GaussianFrame:
    path = Path(path)
    with open(path, "rb") as f:
        header_bytes = b""
        while not header_bytes.endswith(b"end_header\n"):
            chunk = f.read(1)
            if not chunk:
                raise ValueError(f"{path}: truncated PLY header")
            header_bytes += chunk
        body = f.read()

    header = header_bytes.decode("ascii").splitlines()
    if header[0] != "ply":
        raise ValueError(f"{path}: not a PLY file")
    if "format binary_little_endian 1.0" not in header:
        raise ValueError(f"{path}: only binary_little_endian PLY is supported")
    count = None
    props: list[str] = []
    for line in header:
        m = re.match(r"element vertex (\d+)", line)
        if m:
            count = int(m.group(1))
        m = re.match(r"property float (\S+)", line)
        if m:
            props.append(m.group(1))
    if count is None:
        raise ValueError(f"{path}: missing vertex element")

    rec = np.frombuffer(body, dtype=[(p, "<f4") for p in props], count=count)

    def col(name: str) -> np.ndarray:
        return rec[name].astype(np.float64)

    positions = np.stack([col("x"), col("y"), col("z")], axis=1)
    colors = 0.5 + SH_C0 * np.stack([col("f_dc_0"), col("f_dc_1"), col("f_dc_2")], axis=1)
    rest = sorted(
        (p for p in props if p.startswith("f_rest_")), key=lambda p: int(p.split("_")[-1])
    )
    sh = (
        np.stack([col(p) for p in rest], axis=1) if rest else np.zeros((count, 0))
    )
    opacities = expit(col("opacity"))
    log_scales = np.stack([col(f"scale_{i}") for i in range(3)], axis=1)
    rotations = np.stack([col(f"rot_{i}") for i in range(4)], axis=1)
    return GaussianFrame(
        positions=positions,
        rotations=rotations,
        log_scales=log_scales,
        opacities=opacities,
        colors=colors,
        sh=sh,
        frame_index=frame_index,
    )


def write_frame_npz(frame: GaussianFrame, path: str | Path) -> None:
    np.savez(
        Path(path),
        positions=frame.positions,
        rotations=frame.rotations,
        log_scales=frame.log_scales,
        opacities=frame.opacities,
        colors=frame.colors,
        sh=frame.sh,
        frame_index=frame.frame_index,
    )


def read_frame_npz(path: str | Path, frame_index: int | None = None) -> GaussianFrame:
    with np.load(Path(path)) as data:
        return GaussianFrame(
            positions=data["positions"],
            rotations=data["rotations"],
            log_scales=data["log_scales"],
            opacities=data["opacities"],
            colors=data["colors"],
            sh=data["sh"],
            frame_index=int(data["frame_index"]) if frame_index is None else frame_index,
        )


FRAME_SUFFIXES = (".ply", ".npz")


def load_frame(path: str | Path, frame_index: int = 0) -> GaussianFrame:
    """Dispatch on extension: .ply or .npz."""
    path = Path(path)
    if path.suffix == ".ply":
        return read_splat_ply(path, frame_index)
    if path.suffix == ".npz":
        return read_frame_npz(path, frame_index)
    raise ValueError(f"unsupported splat file extension: {path.suffix}")


def save_frame(frame: GaussianFrame, path: str | Path) -> None:
    path = Path(path)
    if path.suffix == ".ply":
        write_splat_ply(frame, path)
    elif path.suffix == ".npz":
        write_frame_npz(frame, path)
    else:
        raise ValueError(f"unsupported splat file extension: {path.suffix}")
