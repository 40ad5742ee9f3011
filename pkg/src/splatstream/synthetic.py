"""Synthetic splat scenes for demos and tests."""
from __future__ import annotations

import numpy as np

from .frames import GaussianFrame
from .layout import sh_coefficient_count


def random_frame(
    n: int,
    sh_degree: int = 0,
    seed: int = 0,
    extent: float = 1.0,
    scale_px: tuple[float, float] = (0.005, 0.02),
    frame_index: int = 0,
) -> GaussianFrame:
    """Uniformly random splats inside a cube of the given extent."""
    rng = np.random.default_rng(seed)
    q = rng.normal(size=(n, 4))
    return GaussianFrame(
        positions=rng.uniform(-extent / 2, extent / 2, size=(n, 3)),
        rotations=q / np.linalg.norm(q, axis=1, keepdims=True),
        log_scales=np.log(rng.uniform(*scale_px, size=(n, 3)) * extent),
        opacities=rng.uniform(0.2, 1.0, size=n),
        colors=rng.uniform(0.0, 1.0, size=(n, 3)),
        sh=rng.uniform(-0.05, 0.05, size=(n, sh_coefficient_count(sh_degree))),
        frame_index=frame_index,
    )


def smooth_motion_sequence(
    n: int,
    num_frames: int,
    seed: int = 0,
    amplitude: float = 0.02,
    sh_degree: int = 0,
) -> list[GaussianFrame]:
    """A sequence deforming a random base frame by a smooth, low-frequency
    sinusoidal field; splat count and correspondence are constant throughout."""
    base = random_frame(n, sh_degree=sh_degree, seed=seed)
    frames = []
    for t in range(num_frames):
        phase = 2 * np.pi * t / max(num_frames, 1)
        offset = amplitude * np.stack(
            [
                np.sin(phase + 3.0 * base.positions[:, 1]),
                np.cos(phase + 2.0 * base.positions[:, 2]),
                np.sin(phase + 4.0 * base.positions[:, 0]),
            ],
            axis=1,
        )
        frames.append(
            GaussianFrame(
                positions=base.positions + offset,
                rotations=base.rotations,
                log_scales=base.log_scales,
                opacities=base.opacities,
                colors=base.colors,
                sh=base.sh,
                frame_index=t,
            )
        )
    return frames
