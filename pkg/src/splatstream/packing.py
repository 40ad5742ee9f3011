"""Pack frame groups of splats into per-attribute 2D integer plane stacks.

Every attribute channel of every frame becomes a side x side integer image;
pixel (u, v) of all planes of frame t describes exactly one splat, so frames
reconstruct by a plain pixel scan with no mapping table. The packing order
is the keyframe's Morton permutation, shared by the whole group, and the
quantization ranges are computed over the whole group so inter-frame
residuals stay meaningful in the quantized domain.

Scales are quantized in log domain and opacity in logit domain (logits
clamped to [-10, 10]); both match how raw 3DGS parameters are stored.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logit

from .frames import GaussianFrame, group_bbox
from .layout import AttributeLayout, attribute_layout
from .morton import sort_splats_morton
from .quantize import QuantRange, dequantize_channel, quantize_channel

LOGIT_CLAMP = 10.0
PLANE_ALIGN = 8


def plane_side(splat_count: int) -> int:
    """Smallest s with s % 8 == 0 and s^2 >= splat_count."""
    if splat_count < 1:
        raise ValueError("splat_count must be >= 1")
    s = int(np.ceil(np.sqrt(splat_count)))
    return ((s + PLANE_ALIGN - 1) // PLANE_ALIGN) * PLANE_ALIGN


def _raw_attribute(frame: GaussianFrame, name: str) -> np.ndarray:
    """Attribute values in the domain they are quantized in, shape (N, C)."""
    if name == "position":
        return frame.positions
    if name == "rotation":
        return frame.rotations
    if name == "scale":
        return frame.log_scales
    if name == "opacity":
        return np.clip(logit(frame.opacities), -LOGIT_CLAMP, LOGIT_CLAMP)[:, None]
    if name == "color":
        return frame.colors
    if name == "sh":
        return frame.sh
    raise KeyError(name)


@dataclass
class PlaneStack:
    """A frame group's attributes as quantized plane sequences.

    planes[name] has shape (T, C, side, side); position planes are uint16,
    all others uint8. ``permutation`` is the splat order used at pack time
    and is None for stacks rebuilt from a decoded bitstream (reconstruction
    never needs it).
    """

    side: int
    splat_count: int
    planes: dict[str, np.ndarray]
    quant: dict[str, QuantRange]
    layout: AttributeLayout
    permutation: np.ndarray | None = None
    start_frame: int = 0

    def __post_init__(self):
        if self.side % PLANE_ALIGN != 0:
            raise ValueError(f"side must be a multiple of {PLANE_ALIGN}")
        if self.side * self.side < self.splat_count:
            raise ValueError("side^2 must cover splat_count")
        frames = {arr.shape[0] for arr in self.planes.values()}
        if len(frames) > 1:
            raise ValueError("all attributes must cover the same frame count")
        for name, arr in self.planes.items():
            if arr.shape[2:] != (self.side, self.side):
                raise ValueError(f"plane {name} has side {arr.shape[2:]}, expected {self.side}")

    @property
    def num_frames(self) -> int:
        return next(iter(self.planes.values())).shape[0]


def pack_group(
    frames: list[GaussianFrame],
    layout: AttributeLayout | None = None,
    permutation: np.ndarray | None = None,
) -> PlaneStack:
    """Bake a frame group into a PlaneStack.

    All frames must share the splat count. The permutation defaults to the
    keyframe's Morton sort and is applied to every frame; unused tail pixels
    are zero-filled.
    """
    if not frames:
        raise ValueError("empty frame group")
    n = frames[0].splat_count
    for f in frames:
        if f.splat_count != n:
            raise ValueError(
                f"splat count mismatch within group: {f.splat_count} != {n} (frame {f.frame_index})"
            )
    if layout is None:
        layout = attribute_layout(frames[0].sh_degree)
    if permutation is None:
        permutation = sort_splats_morton(frames[0])
    permutation = np.asarray(permutation)
    if sorted(permutation.tolist()) != list(range(n)):
        raise ValueError("permutation is not a bijection over splat indices")

    side = plane_side(n)
    planes: dict[str, np.ndarray] = {}
    quant: dict[str, QuantRange] = {}
    for entry in layout.entries:
        if entry.channels == 0:
            continue
        # (T, N, C) raw values in quantization domain, same permutation everywhere
        raw = np.stack([_raw_attribute(f, entry.name)[permutation] for f in frames])
        qr = QuantRange.from_values(raw, entry.bits)
        q = quantize_channel(raw, qr)  # (T, N, C)
        dtype = np.uint16 if entry.bits == 16 else np.uint8
        stack = np.zeros((len(frames), entry.channels, side * side), dtype=dtype)
        stack[:, :, :n] = np.transpose(q, (0, 2, 1))
        planes[entry.name] = stack.reshape(len(frames), entry.channels, side, side)
        quant[entry.name] = qr

    return PlaneStack(
        side=side,
        splat_count=n,
        planes=planes,
        quant=quant,
        layout=layout,
        permutation=permutation,
        start_frame=frames[0].frame_index,
    )


def unpack_frame(stack: PlaneStack, t: int, frame_index: int | None = None) -> GaussianFrame:
    """Rebuild frame t of a group by scanning plane pixels in row-major order.

    Tail pixels beyond splat_count are ignored; quaternions are re-normalized
    and opacity mapped back through the sigmoid.
    """
    if not 0 <= t < stack.num_frames:
        raise ValueError(f"frame {t} outside group of {stack.num_frames}")
    if stack.splat_count < 1:
        raise ValueError("stack holds no splats")
    n = stack.splat_count

    values: dict[str, np.ndarray] = {}
    for name, arr in stack.planes.items():
        flat = arr[t].reshape(arr.shape[1], -1)[:, :n].T  # (N, C) scan order
        values[name] = dequantize_channel(flat, stack.quant[name])

    k = stack.layout.sh_channels
    sh = values.get("sh")
    if sh is None:
        sh = np.zeros((n, k))
    return GaussianFrame(
        positions=values["position"],
        rotations=values["rotation"],
        log_scales=values["scale"],
        opacities=expit(values["opacity"][:, 0]),
        colors=values["color"],
        sh=sh,
        frame_index=stack.start_frame + t if frame_index is None else frame_index,
    )
