"""Pinhole camera: world-to-camera transform plus intrinsics.

Camera space follows the usual computer-vision axes — x right, y down image
rows, z forward — so a point at camera-space (x, y, z) lands on the image
plane at (fx*x/z + cx, fy*y/z + cy). An eye at the origin looking along +z
with world up (0, 1, 0) has the identity view rotation.

Cameras serialize to a small ``key value`` text file (eye/target/up pose
plus intrinsics); see load_camera for the field list.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class Camera:
    view: np.ndarray  # (4, 4) world -> camera
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    near: float = 0.01
    far: float = 100.0
    pose: dict | None = field(default=None, repr=False)  # eye/target/up, if known

    def __post_init__(self):
        self.view = np.asarray(self.view, dtype=np.float64)
        if self.view.shape != (4, 4):
            raise ValueError(f"view must be 4x4, got {self.view.shape}")
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be >= 1")
        if not 0 < self.near < self.far:
            raise ValueError("need 0 < near < far")

    @property
    def rotation(self) -> np.ndarray:
        return self.view[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.view[:3, 3]

    @property
    def center(self) -> np.ndarray:
        """Camera position in world coordinates."""
        return -self.rotation.T @ self.translation

    def to_camera(self, points: np.ndarray) -> np.ndarray:
        """World (N, 3) -> camera-space (N, 3).

        Written elementwise rather than as a matrix product: BLAS may round
        a row differently depending on its position in the batch, and the
        renderer promises bit-identical output under input permutation.
        """
        p = np.atleast_2d(np.asarray(points, dtype=np.float64))
        r, t = self.rotation, self.translation
        out = np.empty_like(p)
        for axis in range(3):
            out[:, axis] = (
                p[:, 0] * r[axis, 0] + p[:, 1] * r[axis, 1] + p[:, 2] * r[axis, 2] + t[axis]
            )
        return out


def look_at(eye, target, up=(0.0, 1.0, 0.0)) -> np.ndarray:
    """4x4 world->camera view matrix for an eye looking at a target point."""
    eye = np.asarray(eye, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    up = np.asarray(up, dtype=np.float64)
    fwd = target - eye
    n = np.linalg.norm(fwd)
    if n < 1e-12:
        raise ValueError("eye and target coincide")
    fwd = fwd / n
    right = np.cross(up, fwd)
    n = np.linalg.norm(right)
    if n < 1e-12:
        raise ValueError("up vector parallel to view direction")
    right = right / n
    down = np.cross(fwd, right)
    rot = np.stack([right, down, fwd])
    view = np.eye(4)
    view[:3, :3] = rot
    view[:3, 3] = -rot @ eye
    return view


def make_camera(
    eye,
    target,
    up=(0.0, 1.0, 0.0),
    width: int = 640,
    height: int = 480,
    fov_deg: float = 60.0,
    near: float = 0.01,
    far: float = 100.0,
) -> Camera:
    """Camera from a pose and a horizontal field of view."""
    fx = 0.5 * width / math.tan(math.radians(fov_deg) / 2)
    return Camera(
        view=look_at(eye, target, up),
        fx=fx,
        fy=fx,
        cx=(width - 1) / 2,
        cy=(height - 1) / 2,
        width=width,
        height=height,
        near=near,
        far=far,
        pose={"eye": list(map(float, eye)), "target": list(map(float, target)), "up": list(map(float, up))},
    )


def orbit(
    center,
    radius: float,
    azimuth_deg: float,
    elevation_deg: float = 0.0,
    **camera_kwargs,
) -> Camera:
    """Camera on a sphere around ``center``, always looking inward."""
    center = np.asarray(center, dtype=np.float64)
    az = math.radians(azimuth_deg)
    el = math.radians(elevation_deg)
    offset = radius * np.array(
        [math.cos(el) * math.sin(az), math.sin(el), math.cos(el) * math.cos(az)]
    )
    return make_camera(center + offset, center, **camera_kwargs)


_SCALAR_FIELDS = ("width", "height", "fx", "fy", "cx", "cy", "near", "far")
_VECTOR_FIELDS = ("eye", "target", "up")


def save_camera(camera: Camera, path) -> None:
    """Write the text format read by load_camera. Requires a known pose."""
    if camera.pose is None:
        raise ValueError("camera has no eye/target/up pose to serialize")
    lines = ["# splatstream camera"]
    for name in _SCALAR_FIELDS:
        lines.append(f"{name} {getattr(camera, name)!r}")
    for name in _VECTOR_FIELDS:
        lines.append(f"{name} " + " ".join(repr(float(v)) for v in camera.pose[name]))
    Path(path).write_text("\n".join(lines) + "\n")


def load_camera(path) -> Camera:
    """Parse the camera text file: one ``key value...`` pair per line.

    Required keys: width, height, fx, fy, cx, cy and the pose vectors
    eye/target/up (three floats each); near/far optional. Blank lines and
    ``#`` comments are ignored.
    """
    fields: dict[str, list[float]] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *values = line.split()
        if not values:
            raise ValueError(f"camera file line {raw!r} has no value")
        fields[key] = [float(v) for v in values]

    missing = [k for k in ("width", "height", "fx", "fy", "cx", "cy", *_VECTOR_FIELDS) if k not in fields]
    if missing:
        raise ValueError(f"camera file missing fields: {missing}")
    for name in _VECTOR_FIELDS:
        if len(fields[name]) != 3:
            raise ValueError(f"{name} needs three components")

    eye, target, up = fields["eye"], fields["target"], fields["up"]
    return Camera(
        view=look_at(eye, target, up),
        fx=fields["fx"][0],
        fy=fields["fy"][0],
        cx=fields["cx"][0],
        cy=fields["cy"][0],
        width=int(fields["width"][0]),
        height=int(fields["height"][0]),
        near=fields.get("near", [0.01])[0],
        far=fields.get("far", [100.0])[0],
        pose={"eye": eye, "target": target, "up": up},
    )
