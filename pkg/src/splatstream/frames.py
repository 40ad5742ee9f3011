"""Splat frame container: struct-of-arrays storage for one frame's Gaussians.

Storage conventions (matching how raw 3DGS parameters are kept):
  - ``log_scales`` are log-domain; world scale = exp(log_scales).
  - ``opacities`` are activated values in [0, 1] (sigmoid already applied).
  - ``rotations`` are unit quaternions in (w, x, y, z) order.
  - ``colors`` is the view-independent base color (SH degree-0 term folded
    in); ``sh`` holds the higher-order coefficients, flattened channel-major
    (all R coefficients, then G, then B).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

QUAT_NORM_TOL = 1e-2


@dataclass(frozen=True)
class Bbox:
    """Axis-aligned bounds, mins/maxs per axis."""

    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mins", np.asarray(self.mins, dtype=np.float64))
        object.__setattr__(self, "maxs", np.asarray(self.maxs, dtype=np.float64))
        if self.mins.shape != (3,) or self.maxs.shape != (3,):
            raise ValueError("bbox mins/maxs must have shape (3,)")
        if np.any(self.maxs < self.mins):
            raise ValueError("bbox maxs must be >= mins")

    @property
    def extent(self) -> np.ndarray:
        return self.maxs - self.mins

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.extent))

    def contains(self, points: np.ndarray) -> bool:
        return bool(np.all(points >= self.mins - 1e-12) and np.all(points <= self.maxs + 1e-12))

    def union(self, other: "Bbox") -> "Bbox":
        return Bbox(np.minimum(self.mins, other.mins), np.maximum(self.maxs, other.maxs))


def normalize_quaternions(q: np.ndarray) -> np.ndarray:
    """Normalize (N, 4) quaternions to unit length. Zero quaternions are
    invalid. Rows whose norm is already within ``QUAT_NORM_TOL`` of 1 pass
    through untouched. That makes the operation idempotent (re-wrapping a
    frame never perturbs its rotations by a rounding step) and lets 8-bit
    dequantized rotations — unit up to at most ~8e-3 of norm drift — be
    stored verbatim, so reconstructed attributes stay inside the half-step
    round-trip bound instead of being smeared by a renormalize."""
    norms = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(norms < 1e-12):
        raise ValueError("zero-norm quaternion cannot be normalized")
    return np.where(np.abs(norms - 1.0) <= QUAT_NORM_TOL, q, q / norms)


@dataclass
class GaussianFrame:
    """One frame's splat set. All arrays share leading dimension N > 0."""

    positions: np.ndarray  # (N, 3) world units
    rotations: np.ndarray  # (N, 4) unit quaternions wxyz
    log_scales: np.ndarray  # (N, 3)
    opacities: np.ndarray  # (N,) in [0, 1]
    colors: np.ndarray  # (N, 3) base RGB
    sh: np.ndarray  # (N, K) higher-order SH coefficients
    frame_index: int = 0
    bbox: Bbox = field(default=None)  # computed from positions when omitted

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64)
        self.rotations = np.asarray(self.rotations, dtype=np.float64)
        self.log_scales = np.asarray(self.log_scales, dtype=np.float64)
        self.opacities = np.asarray(self.opacities, dtype=np.float64)
        self.colors = np.asarray(self.colors, dtype=np.float64)
        self.sh = np.asarray(self.sh, dtype=np.float64)

        n = self.positions.shape[0]
        if n == 0:
            raise ValueError("frame must contain at least one splat")
        if self.positions.shape != (n, 3):
            raise ValueError(f"positions must be (N, 3), got {self.positions.shape}")
        if self.rotations.shape != (n, 4):
            raise ValueError(f"rotations must be (N, 4), got {self.rotations.shape}")
        if self.log_scales.shape != (n, 3):
            raise ValueError(f"log_scales must be (N, 3), got {self.log_scales.shape}")
        if self.opacities.shape != (n,):
            raise ValueError(f"opacities must be (N,), got {self.opacities.shape}")
        if self.colors.shape != (n, 3):
            raise ValueError(f"colors must be (N, 3), got {self.colors.shape}")
        if self.sh.ndim != 2 or self.sh.shape[0] != n:
            raise ValueError(f"sh must be (N, K), got {self.sh.shape}")

        for name in ("positions", "rotations", "log_scales", "opacities", "colors", "sh"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"non-finite values in {name}")
        if np.any(self.opacities < 0) or np.any(self.opacities > 1):
            raise ValueError("opacities must lie in [0, 1]")

        self.rotations = normalize_quaternions(self.rotations)

        if self.bbox is None:
            self.bbox = Bbox(self.positions.min(axis=0), self.positions.max(axis=0))
        elif not self.bbox.contains(self.positions):
            raise ValueError("bbox does not contain every splat position")

    @property
    def splat_count(self) -> int:
        return self.positions.shape[0]

    @property
    def sh_degree(self) -> int:
        k = self.sh.shape[1]
        degree = round((k / 3 + 1) ** 0.5) - 1
        if 3 * ((degree + 1) ** 2 - 1) != k:
            raise ValueError(f"sh coefficient count {k} does not match any degree")
        return degree

    @property
    def scales(self) -> np.ndarray:
        """Activated (positive) world-space scales."""
        return np.exp(self.log_scales)

    def select(self, indices: np.ndarray, frame_index: int | None = None) -> "GaussianFrame":
        """Subset of splats, attributes copied bit-exactly."""
        return GaussianFrame(
            positions=self.positions[indices].copy(),
            rotations=self.rotations[indices].copy(),
            log_scales=self.log_scales[indices].copy(),
            opacities=self.opacities[indices].copy(),
            colors=self.colors[indices].copy(),
            sh=self.sh[indices].copy(),
            frame_index=self.frame_index if frame_index is None else frame_index,
        )

    def allclose(self, other: "GaussianFrame", atol: float = 0.0, rtol: float = 0.0) -> bool:
        return (
            self.splat_count == other.splat_count
            and np.allclose(self.positions, other.positions, atol=atol, rtol=rtol)
            and np.allclose(self.rotations, other.rotations, atol=atol, rtol=rtol)
            and np.allclose(self.log_scales, other.log_scales, atol=atol, rtol=rtol)
            and np.allclose(self.opacities, other.opacities, atol=atol, rtol=rtol)
            and np.allclose(self.colors, other.colors, atol=atol, rtol=rtol)
            and np.allclose(self.sh, other.sh, atol=atol, rtol=rtol)
        )


def group_bbox(frames: list[GaussianFrame]) -> Bbox:
    """Union bbox across a frame group."""
    box = frames[0].bbox
    for f in frames[1:]:
        box = box.union(f.bbox)
    return box
