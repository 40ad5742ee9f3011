"""Attribute layout: which channels a splat has and how many bits each gets.

Positions are quantized to 16 bits (stored in the container as a hi/lo pair
of 8-bit planes); every other attribute is 8-bit. The spherical-harmonics
channel count follows the usual 3 * ((degree+1)^2 - 1) rule for the
higher-order (non-DC) coefficients.
"""
from __future__ import annotations

from dataclasses import dataclass

MAX_SH_DEGREE = 3

POSITION_BITS = 16
DEFAULT_BITS = 8


@dataclass(frozen=True)
class AttributeEntry:
    name: str
    channels: int
    bits: int


@dataclass(frozen=True)
class AttributeLayout:
    """Ordered attribute channel map for one splat."""

    sh_degree: int
    entries: tuple[AttributeEntry, ...]

    @property
    def total_dims(self) -> int:
        return sum(e.channels for e in self.entries)

    @property
    def sh_channels(self) -> int:
        return self["sh"].channels

    def __getitem__(self, name: str) -> AttributeEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def names(self) -> list[str]:
        return [e.name for e in self.entries]


def sh_coefficient_count(sh_degree: int) -> int:
    """Number of higher-order SH floats per splat (DC excluded)."""
    return 3 * ((sh_degree + 1) ** 2 - 1)


def attribute_layout(sh_degree: int) -> AttributeLayout:
    """Build the canonical attribute layout for a given SH degree.

    Raises ValueError if sh_degree is outside [0, 3].
    """
    if not 0 <= sh_degree <= MAX_SH_DEGREE:
        raise ValueError(f"sh_degree must be in [0, {MAX_SH_DEGREE}], got {sh_degree}")
    entries = (
        AttributeEntry("position", 3, POSITION_BITS),
        AttributeEntry("rotation", 4, DEFAULT_BITS),
        AttributeEntry("scale", 3, DEFAULT_BITS),
        AttributeEntry("opacity", 1, DEFAULT_BITS),
        AttributeEntry("color", 3, DEFAULT_BITS),
        AttributeEntry("sh", sh_coefficient_count(sh_degree), DEFAULT_BITS),
    )
    return AttributeLayout(sh_degree=sh_degree, entries=entries)
