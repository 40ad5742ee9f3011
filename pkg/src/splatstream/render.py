"""Deterministic software splat rasterizer.

Projection follows the EWA-splatting recipe: the world covariance
R S S^T R^T is pushed through the view rotation and the perspective
Jacobian at the splat center, floored by +0.3 px^2 on the diagonal, and
blended front to back with per-pixel early termination once transmittance
drops under 1/255. Splats are depth-sorted with a stable tie-break on the
original index, so the image is bit-identical for any input permutation and
for any tiling of the pixel loop. Pixel (x, y) samples the image plane at
exactly (x, y).

The inner blend loop is JIT-compiled (single-threaded) — the only hot loop
in the package; everything around it is vectorized numpy.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .camera import Camera
from .frames import GaussianFrame

COV2D_FLOOR = 0.3
SIGMA_CUTOFF = 3.0
MIN_TRANSMITTANCE = 1.0 / 255.0
MIN_ALPHA = 1.0 / 255.0
PSNR_MAX = 100.0

# real spherical-harmonics basis constants (degree 1..3), de-facto 3DGS order
SH_C1 = 0.4886025119029199
SH_C2 = (1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
         -1.0925484305920792, 0.5462742152960396)
SH_C3 = (-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
         0.3731763325901154, -0.4570457994644658, 1.445305721320277,
         -0.5900435899266435)


@dataclass
class ImageBuffer:
    rgb: np.ndarray  # (H, W, 3) in [0, 1]
    alpha: np.ndarray | None = None  # (H, W) accumulated opacity
    skipped_splats: int = 0  # singular 2D covariance after the floor
    culled_splats: int = 0  # behind the near plane

    def __post_init__(self):
        self.rgb = np.asarray(self.rgb, dtype=np.float64)
        if self.rgb.ndim != 3 or self.rgb.shape[2] != 3:
            raise ValueError(f"rgb must be (H, W, 3), got {self.rgb.shape}")
        if not np.all(np.isfinite(self.rgb)):
            raise ValueError("non-finite pixels")

    @property
    def height(self) -> int:
        return self.rgb.shape[0]

    @property
    def width(self) -> int:
        return self.rgb.shape[1]


def quaternion_to_matrix(q: np.ndarray) -> np.ndarray:
    """(..., 4) wxyz unit quaternions -> (..., 3, 3) rotation matrices."""
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    m = np.empty(q.shape[:-1] + (3, 3))
    m[..., 0, 0] = 1 - 2 * (y * y + z * z)
    m[..., 0, 1] = 2 * (x * y - w * z)
    m[..., 0, 2] = 2 * (x * z + w * y)
    m[..., 1, 0] = 2 * (x * y + w * z)
    m[..., 1, 1] = 1 - 2 * (x * x + z * z)
    m[..., 1, 2] = 2 * (y * z - w * x)
    m[..., 2, 0] = 2 * (x * z - w * y)
    m[..., 2, 1] = 2 * (y * z + w * x)
    m[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return m


def covariance_3d(rotation: np.ndarray, scales: np.ndarray) -> np.ndarray:
    """World covariance R S S^T R^T from unit quaternion(s) and linear scales."""
    rot = quaternion_to_matrix(rotation)
    s = np.asarray(scales, dtype=np.float64)
    rs = rot * s[..., None, :]  # R @ diag(s)
    return rs @ np.swapaxes(rs, -1, -2)


def project_splat(position, cov3d, camera: Camera):
    """Project one splat: (mean2d, cov2d with floor, depth), or None if the
    center is behind the near plane (culled)."""
    cam = camera.to_camera(position)[0]
    z = cam[2]
    if z <= camera.near:
        return None
    x, y = cam[0], cam[1]
    j = np.array(
        [
            [camera.fx / z, 0.0, -camera.fx * x / (z * z)],
            [0.0, camera.fy / z, -camera.fy * y / (z * z)],
        ]
    )
    wrot = camera.rotation
    cov_cam = wrot @ np.asarray(cov3d, dtype=np.float64) @ wrot.T
    cov2d = j @ cov_cam @ j.T + COV2D_FLOOR * np.eye(2)
    mean2d = np.array([camera.fx * x / z + camera.cx, camera.fy * y / z + camera.cy])
    return mean2d, cov2d, float(z)


def _project_all(frame: GaussianFrame, camera: Camera):
    """Vectorized projection of every splat; returns per-splat arrays plus
    the in-front mask."""
    cam = camera.to_camera(frame.positions)
    z = cam[:, 2]
    front = z > camera.near
    x, y = cam[:, 0], cam[:, 1]
    zs = np.where(front, z, 1.0)  # dummy depth for culled rows

    j = np.zeros((frame.splat_count, 2, 3))
    j[:, 0, 0] = camera.fx / zs
    j[:, 1, 1] = camera.fy / zs
    j[:, 0, 2] = -camera.fx * x / (zs * zs)
    j[:, 1, 2] = -camera.fy * y / (zs * zs)

    cov3d = covariance_3d(frame.rotations, frame.scales)
    wrot = camera.rotation
    cov_cam = np.einsum("ij,njk,lk->nil", wrot, cov3d, wrot)
    cov2d = np.einsum("nij,njk,nlk->nil", j, cov_cam, j)
    cov2d[:, 0, 0] += COV2D_FLOOR
    cov2d[:, 1, 1] += COV2D_FLOOR

    mean2d = np.stack([camera.fx * x / zs + camera.cx, camera.fy * y / zs + camera.cy], axis=1)
    return mean2d, cov2d, z, front


def eval_sh(frame: GaussianFrame, camera: Camera, sh_degree: int) -> np.ndarray:
    """View-dependent colors: DC color plus SH terms up to sh_degree,
    clipped to [0, 1]. SH coefficients are stored channel-major."""
    colors = frame.colors
    degree = min(sh_degree, frame.sh_degree)
    if degree < 1:
        return np.clip(colors, 0.0, 1.0)

    d = frame.positions - camera.center
    d = d / np.linalg.norm(d, axis=1, keepdims=True)
    x, y, z = d[:, 0], d[:, 1], d[:, 2]
    basis = [-SH_C1 * y, SH_C1 * z, -SH_C1 * x]
    if degree >= 2:
        xx, yy, zz = x * x, y * y, z * z
        xy, yz, xz = x * y, y * z, x * z
        basis += [
            SH_C2[0] * xy,
            SH_C2[1] * yz,
            SH_C2[2] * (2 * zz - xx - yy),
            SH_C2[3] * xz,
            SH_C2[4] * (xx - yy),
        ]
    if degree >= 3:
        basis += [
            SH_C3[0] * y * (3 * xx - yy),
            SH_C3[1] * xy * z,
            SH_C3[2] * y * (4 * zz - xx - yy),
            SH_C3[3] * z * (2 * zz - 3 * xx - 3 * yy),
            SH_C3[4] * x * (4 * zz - xx - yy),
            SH_C3[5] * z * (xx - yy),
            SH_C3[6] * x * (xx - 3 * yy),
        ]
    bmat = np.stack(basis, axis=1)  # (N, B)
    nb = bmat.shape[1]
    per_channel = frame.sh.shape[1] // 3
    out = colors.copy()
    for ch in range(3):
        coeffs = frame.sh[:, ch * per_channel : ch * per_channel + nb]
        out[:, ch] += np.einsum("nb,nb->n", bmat, coeffs)
    return np.clip(out, 0.0, 1.0)


@njit(cache=True)
def _blend_kernel(means, inv_a, inv_b, inv_c, opac, colors, x0, x1, y0, y1, rgb, trans):
    for i in range(means.shape[0]):
        mx = means[i, 0]
        my = means[i, 1]
        for py in range(y0[i], y1[i] + 1):
            dy = py - my
            for px in range(x0[i], x1[i] + 1):
                t = trans[py, px]
                if t < MIN_TRANSMITTANCE:
                    continue
                dx = px - mx
                q = inv_a[i] * dx * dx + 2.0 * inv_b[i] * dx * dy + inv_c[i] * dy * dy
                alpha = opac[i] * np.exp(-0.5 * q)
                if alpha < MIN_ALPHA:
                    continue
                w = alpha * t
                rgb[py, px, 0] += w * colors[i, 0]
                rgb[py, px, 1] += w * colors[i, 1]
                rgb[py, px, 2] += w * colors[i, 2]
                trans[py, px] = t * (1.0 - alpha)


def render(frame: GaussianFrame, camera: Camera, sh_degree: int = 0) -> ImageBuffer:
    """Rasterize a frame. Depth-sorted front-to-back alpha blending over a
    black background; deterministic for fixed input."""
    mean2d, cov2d, depth, front = _project_all(frame, camera)
    culled = int(np.sum(~front))

    a = cov2d[:, 0, 0]
    b = cov2d[:, 0, 1]
    c = cov2d[:, 1, 1]
    det = a * c - b * b
    ok = front & (det > 1e-12)
    skipped = int(np.sum(front & ~(det > 1e-12)))

    colors = eval_sh(frame, camera, sh_degree)

    idx = np.nonzero(ok)[0]
    # stable depth order with index tie-break
    order = idx[np.argsort(depth[idx], kind="stable")]

    rx = SIGMA_CUTOFF * np.sqrt(a)
    ry = SIGMA_CUTOFF * np.sqrt(c)
    x0 = np.maximum(np.ceil(mean2d[:, 0] - rx), 0).astype(np.int64)
    x1 = np.minimum(np.floor(mean2d[:, 0] + rx), camera.width - 1).astype(np.int64)
    y0 = np.maximum(np.ceil(mean2d[:, 1] - ry), 0).astype(np.int64)
    y1 = np.minimum(np.floor(mean2d[:, 1] + ry), camera.height - 1).astype(np.int64)

    rgb = np.zeros((camera.height, camera.width, 3))
    trans = np.ones((camera.height, camera.width))
    _blend_kernel(
        np.ascontiguousarray(mean2d[order]),
        np.ascontiguousarray(c[order] / det[order]),
        np.ascontiguousarray(-b[order] / det[order]),
        np.ascontiguousarray(a[order] / det[order]),
        np.ascontiguousarray(frame.opacities[order]),
        np.ascontiguousarray(colors[order]),
        x0[order],
        x1[order],
        y0[order],
        y1[order],
        rgb,
        trans,
    )
    return ImageBuffer(
        rgb=np.clip(rgb, 0.0, 1.0),
        alpha=1.0 - trans,
        skipped_splats=skipped,
        culled_splats=culled,
    )


def psnr(a, b) -> float:
    """10*log10(1/MSE) between two images in [0, 1]; identical inputs
    report the PSNR_MAX sentinel, and values are capped there."""
    xa = a.rgb if isinstance(a, ImageBuffer) else np.asarray(a, dtype=np.float64)
    xb = b.rgb if isinstance(b, ImageBuffer) else np.asarray(b, dtype=np.float64)
    if xa.shape != xb.shape:
        raise ValueError(f"image shape mismatch: {xa.shape} vs {xb.shape}")
    mse = float(np.mean((xa - xb) ** 2))
    if mse == 0.0:
        return PSNR_MAX
    return min(10.0 * np.log10(1.0 / mse), PSNR_MAX)
