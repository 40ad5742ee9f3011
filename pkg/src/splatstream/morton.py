"""Morton (Z-order) codes and spatial sorting of splats.

Coordinates are normalized to the frame bbox, scaled to 21-bit integers and
bit-interleaved into a 63-bit code, so spatially close splats land near each
other in the packed 2D scan order.
"""
from __future__ import annotations

import numpy as np

from .frames import GaussianFrame

COORD_BITS = 21
COORD_MAX = (1 << COORD_BITS) - 1


def _part1by2(x: np.ndarray) -> np.ndarray:
    """Spread the low 21 bits of x so bit i moves to bit 3i (magic-bit method)."""
    x = x.astype(np.uint64) & np.uint64(0x1FFFFF)
    x = (x | (x << np.uint64(32))) & np.uint64(0x1F00000000FFFF)
    x = (x | (x << np.uint64(16))) & np.uint64(0x1F0000FF0000FF)
    x = (x | (x << np.uint64(8))) & np.uint64(0x100F00F00F00F00F)
    x = (x | (x << np.uint64(4))) & np.uint64(0x10C30C30C30C30C3)
    x = (x | (x << np.uint64(2))) & np.uint64(0x1249249249249249)
    return x


def morton_code(ix, iy, iz) -> np.ndarray | int:
    """Interleave three 21-bit integers: bit i of ix lands at output bit 3i,
    iy at 3i+1, iz at 3i+2. Scalar in, scalar out; arrays in, array out."""
    scalar = np.isscalar(ix) and np.isscalar(iy) and np.isscalar(iz)
    ix = np.atleast_1d(np.asarray(ix, dtype=np.int64))
    iy = np.atleast_1d(np.asarray(iy, dtype=np.int64))
    iz = np.atleast_1d(np.asarray(iz, dtype=np.int64))
    for name, arr in (("ix", ix), ("iy", iy), ("iz", iz)):
        if np.any(arr < 0) or np.any(arr > COORD_MAX):
            raise ValueError(f"{name} outside [0, 2^{COORD_BITS})")
    code = _part1by2(ix) | (_part1by2(iy) << np.uint64(1)) | (_part1by2(iz) << np.uint64(2))
    return int(code[0]) if scalar else code


def coords_to_grid(positions: np.ndarray, mins: np.ndarray, maxs: np.ndarray) -> np.ndarray:
    """Normalize positions to the given bounds and scale to [0, 2^21).

    A degenerate axis (max == min) maps to grid coordinate 0.
    """
    p = np.asarray(positions, dtype=np.float64)
    extent = np.asarray(maxs, dtype=np.float64) - np.asarray(mins, dtype=np.float64)
    safe = np.where(extent > 0, extent, 1.0)
    t = (p - mins) / safe
    t = np.where(extent > 0, t, 0.0)
    grid = np.floor(t * (1 << COORD_BITS)).astype(np.int64)
    return np.clip(grid, 0, COORD_MAX)


def sort_splats_morton(frame: GaussianFrame) -> np.ndarray:
    """Permutation ordering splats by Morton code of their bbox-normalized
    positions; ties broken by original index (stable sort)."""
    grid = coords_to_grid(frame.positions, frame.bbox.mins, frame.bbox.maxs)
    codes = morton_code(grid[:, 0], grid[:, 1], grid[:, 2])
    return np.argsort(codes, kind="stable")
