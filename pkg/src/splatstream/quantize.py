"""Uniform scalar quantization of attribute channels.

Rounding is half-away-from-zero everywhere (not numpy's half-to-even), so
independent implementations agree bit-exactly. Ranges are per channel; a
degenerate range (max == min) is widened by EPS_RANGE so constant channels
quantize to 0 and reconstruct losslessly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EPS_RANGE = 1e-6


def round_half_away(x: np.ndarray) -> np.ndarray:
    """Round to nearest integer, ties away from zero."""
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


@dataclass(frozen=True)
class QuantRange:
    """Per-channel [min, max] plus bit depth (8 or 16)."""

    mins: np.ndarray  # (C,)
    maxs: np.ndarray  # (C,)
    bits: int

    def __post_init__(self):
        mins = np.atleast_1d(np.asarray(self.mins, dtype=np.float64))
        maxs = np.atleast_1d(np.asarray(self.maxs, dtype=np.float64))
        if self.bits not in (8, 16):
            raise ValueError(f"bits must be 8 or 16, got {self.bits}")
        if mins.shape != maxs.shape or mins.ndim != 1:
            raise ValueError("mins/maxs must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(mins)) and np.all(np.isfinite(maxs))):
            raise ValueError("non-finite quantization range")
        if np.any(maxs < mins):
            raise ValueError("range max < min")
        # widen degenerate channels so (max - min) never divides by zero
        maxs = np.where(maxs - mins > 0, maxs, mins + EPS_RANGE)
        object.__setattr__(self, "mins", mins)
        object.__setattr__(self, "maxs", maxs)

    @property
    def channels(self) -> int:
        return self.mins.shape[0]

    @property
    def levels(self) -> int:
        return (1 << self.bits) - 1

    @property
    def step_bound(self) -> np.ndarray:
        """Max absolute round-trip error per channel: (max-min) / (2 * (2^bits - 1))."""
        return (self.maxs - self.mins) / (2 * self.levels)

    @classmethod
    def from_values(cls, values: np.ndarray, bits: int) -> "QuantRange":
        """Range over all leading axes of (..., C) values."""
        v = np.asarray(values, dtype=np.float64)
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite values")
        flat = v.reshape(-1, v.shape[-1])
        return cls(flat.min(axis=0), flat.max(axis=0), bits)


def quantize_channel(values: np.ndarray, qrange: QuantRange) -> np.ndarray:
    """Map (..., C) floats onto the integer lattice [0, 2^bits - 1].

    q = round((v - min) / (max - min) * (2^bits - 1)), clamped.
    """
    v = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError("non-finite input value")
    t = (v - qrange.mins) / (qrange.maxs - qrange.mins) * qrange.levels
    q = np.clip(round_half_away(t), 0, qrange.levels)
    dtype = np.uint16 if qrange.bits == 16 else np.uint8
    return q.astype(dtype)


def dequantize_channel(q: np.ndarray, qrange: QuantRange) -> np.ndarray:
    """Inverse of quantize_channel: lattice midpoint reconstruction."""
    qi = np.asarray(q)
    if np.any(qi.astype(np.int64) < 0) or np.any(qi.astype(np.int64) > qrange.levels):
        raise ValueError(f"quantized value out of [0, {qrange.levels}]")
    return qrange.mins + qi.astype(np.float64) / qrange.levels * (qrange.maxs - qrange.mins)


def split_u16(q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split 16-bit integers into (hi, lo) 8-bit halves."""
    qi = np.asarray(q)
    if np.any(qi.astype(np.int64) < 0) or np.any(qi.astype(np.int64) > 0xFFFF):
        raise ValueError("value out of uint16 range")
    q16 = qi.astype(np.uint16)
    return (q16 >> 8).astype(np.uint8), (q16 & 0xFF).astype(np.uint8)


def merge_u16(hi: np.ndarray, lo: np.ndarray) -> np.ndarray:
    """Exact inverse of split_u16."""
    return (np.asarray(hi, dtype=np.uint16) << 8) | np.asarray(lo, dtype=np.uint16)
