"""Hash-grid motion estimation and keyframe opacity pruning.

The motion model maps a splat's previous-frame position to a position delta:
a multiresolution hash encoding (trilinearly interpolated per-level feature
tables, corner slots chosen by the usual xor-of-primes spatial hash) feeding
a small ReLU MLP whose last layer starts at zero, so a fresh field predicts
no motion. Forward and backward passes are written out by hand in float64 —
the architecture is fixed, so the chain rule is short, and the whole module
stays free of autodiff frameworks. Gradients are finite-difference-checked
in the tests.

Fitting runs Adam with cosine-decayed learning rates (faster on the tables
than on the MLP, as is usual for hash grids). The training objective is any
callable ``x_pred -> (loss, dloss/dx_pred)``; two desk-scale objectives are
provided — supervised L2 against known targets and symmetric chamfer
distance against an unorganized cloud. Photometric objectives plug in
through the same callable without further support here.

Pruning repeatedly drops the fixed ratio of lowest-opacity splats (running
an optional fine-tune hook between rounds) until the survivor count reaches
the target.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .frames import Bbox, GaussianFrame

HASH_PRIMES = (1, 2654435761, 805459861)
HIDDEN_WIDTH = 64
TABLE_INIT_SCALE = 1e-4
CHECKPOINT_MAGIC = b"GVMF"
CHECKPOINT_VERSION = 1

DEFAULT_ITERS = 500
LR_TABLES = 1e-2
LR_MLP = 1e-3

PRUNE_RATIO = 0.3
PRUNE_TARGET = 100_000


@dataclass(frozen=True)
class HashGridConfig:
    levels: int = 16
    features: int = 4
    table_size: int = 1 << 19
    base_resolution: int = 16
    max_resolution: int = 512

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        if self.features < 1 or self.table_size < 2:
            raise ValueError("bad features/table_size")
        res = self.resolutions
        if any(b <= a for a, b in zip(res, res[1:])):
            raise ValueError(f"per-level resolutions must strictly increase, got {res}")

    @property
    def growth(self) -> float:
        if self.levels == 1:
            return 1.0
        return math.exp(
            (math.log(self.max_resolution) - math.log(self.base_resolution))
            / (self.levels - 1)
        )

    @property
    def resolutions(self) -> tuple[int, ...]:
        b = self.growth
        return tuple(
            int(math.floor(self.base_resolution * b**level + 1e-9))
            for level in range(self.levels)
        )

    @property
    def feature_dim(self) -> int:
        return self.levels * self.features


@dataclass
class MotionField:
    """Hash tables + 2-hidden-layer MLP, with the world->unit-cube transform
    it was built for. ``delta_clamp`` bounds the output norm (None = off)."""

    cfg: HashGridConfig
    tables: np.ndarray  # (L, T, F)
    w1: np.ndarray  # (H, L*F)
    b1: np.ndarray  # (H,)
    w2: np.ndarray  # (H, H)
    b2: np.ndarray  # (H,)
    w3: np.ndarray  # (3, H)
    b3: np.ndarray  # (3,)
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))
    extent: np.ndarray = field(default_factory=lambda: np.ones(3))
    delta_clamp: float | None = None

    def __post_init__(self):
        l, t, f = self.cfg.levels, self.cfg.table_size, self.cfg.features
        if self.tables.shape != (l, t, f):
            raise ValueError(f"tables must be {(l, t, f)}, got {self.tables.shape}")
        for arr in (self.tables, self.w1, self.b1, self.w2, self.b2, self.w3, self.b3):
            if not np.all(np.isfinite(arr)):
                raise ValueError("non-finite field parameter")

    def params(self) -> dict[str, np.ndarray]:
        """Live views of every learnable array, keyed for the optimizer."""
        return {
            "tables": self.tables,
            "w1": self.w1,
            "b1": self.b1,
            "w2": self.w2,
            "b2": self.b2,
            "w3": self.w3,
            "b3": self.b3,
        }

    def normalize(self, x: np.ndarray) -> np.ndarray:
        u = (np.asarray(x, dtype=np.float64) - self.origin) / self.extent
        return np.clip(u, 0.0, 1.0)


def init_motion_field(
    cfg: HashGridConfig | None = None,
    seed: int = 0,
    bbox: Bbox | None = None,
) -> MotionField:
    """Small random tables and hidden layers, zero last layer (=> delta 0)."""
    cfg = cfg or HashGridConfig()
    rng = np.random.default_rng(seed)
    d_in = cfg.feature_dim
    h = HIDDEN_WIDTH
    fld = MotionField(
        cfg=cfg,
        tables=rng.uniform(-TABLE_INIT_SCALE, TABLE_INIT_SCALE, (cfg.levels, cfg.table_size, cfg.features)),
        w1=rng.normal(0.0, math.sqrt(2.0 / d_in), (h, d_in)),
        b1=np.zeros(h),
        w2=rng.normal(0.0, math.sqrt(2.0 / h), (h, h)),
        b2=np.zeros(h),
        w3=np.zeros((3, h)),
        b3=np.zeros(3),
    )
    if bbox is not None:
        fld.origin = bbox.mins.copy()
        fld.extent = np.maximum(bbox.extent, 1e-9)
        fld.delta_clamp = bbox.diagonal if bbox.diagonal > 0 else None
    return fld


# --- hash encoding --------------------------------------------------------

_CORNERS = np.array(
    [[dx, dy, dz] for dx in (0, 1) for dy in (0, 1) for dz in (0, 1)], dtype=np.int64
)


def _hash_corners(coords: np.ndarray, table_size: int) -> np.ndarray:
    """XOR-of-primes spatial hash of integer (..., 3) coords into [0, T)."""
    c = coords.astype(np.uint64)
    idx = (
        c[..., 0] * np.uint64(HASH_PRIMES[0])
        ^ c[..., 1] * np.uint64(HASH_PRIMES[1])
        ^ c[..., 2] * np.uint64(HASH_PRIMES[2])
    )
    return (idx % np.uint64(table_size)).astype(np.int64)


def _encode_level(u: np.ndarray, res: int, table: np.ndarray):
    """Trilinear feature lookup at one level.

    Returns (features (n, F), corner indices (n, 8), corner weights (n, 8)),
    the latter two reused by the backward pass.
    """
    s = u * res
    c0 = np.floor(s).astype(np.int64)
    f = s - c0
    corners = c0[:, None, :] + _CORNERS[None, :, :]  # (n, 8, 3)
    idx = _hash_corners(corners, table.shape[0])  # (n, 8)
    # weight per corner: prod over axes of f or (1 - f)
    w = np.ones((u.shape[0], 8))
    for axis in range(3):
        on = _CORNERS[:, axis] == 1
        w[:, on] *= f[:, axis : axis + 1]
        w[:, ~on] *= 1.0 - f[:, axis : axis + 1]
    feats = np.einsum("nc,ncf->nf", w, table[idx])
    return feats, idx, w


def hash_encode(x: np.ndarray, cfg: HashGridConfig, tables: np.ndarray) -> np.ndarray:
    """Concatenated per-level features for unit-cube positions (n, 3)."""
    u = np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)
    squeeze = u.ndim == 1
    u = np.atleast_2d(u)
    out = np.empty((u.shape[0], cfg.feature_dim))
    for level, res in enumerate(cfg.resolutions):
        feats, _, _ = _encode_level(u, res, tables[level])
        out[:, level * cfg.features : (level + 1) * cfg.features] = feats
    return out[0] if squeeze else out


# --- forward / backward ---------------------------------------------------


def _encode_stack(cfg: HashGridConfig, tables: np.ndarray, u: np.ndarray):
    """All levels at once: features (n, L*F), corner slots and weights for
    the backward scatter. Equivalent to the per-level hash_encode loop."""
    n = u.shape[0]
    lv, f_dim = cfg.levels, cfg.features
    res = np.array(cfg.resolutions, dtype=np.float64)
    s = u[:, None, :] * res[None, :, None]  # (n, L, 3)
    c0 = np.floor(s).astype(np.int64)
    frac = s - c0
    corners = c0[:, :, None, :] + _CORNERS[None, None, :, :]  # (n, L, 8, 3)
    idx = _hash_corners(corners, cfg.table_size)
    w = np.ones((n, lv, 8))
    for axis in range(3):
        on = _CORNERS[:, axis] == 1
        w[:, :, on] *= frac[:, :, axis : axis + 1]
        w[:, :, ~on] *= 1.0 - frac[:, :, axis : axis + 1]
    slot = idx + np.arange(lv, dtype=np.int64)[None, :, None] * cfg.table_size
    corner_feats = tables.reshape(lv * cfg.table_size, f_dim)[slot]  # (n, L, 8, F)
    feats = np.einsum("nlc,nlcf->nlf", w, corner_feats)
    return feats.reshape(n, cfg.feature_dim), slot, w


def _forward(fld: MotionField, u: np.ndarray):
    """Raw (unclamped) delta prediction plus everything backward needs."""
    h_feat, slot, w = _encode_stack(fld.cfg, fld.tables, u)
    z1 = h_feat @ fld.w1.T + fld.b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ fld.w2.T + fld.b2
    a2 = np.maximum(z2, 0.0)
    delta = a2 @ fld.w3.T + fld.b3
    cache = (h_feat, slot, w, z1, a1, z2, a2)
    return delta, cache


def _backward(fld: MotionField, cache, d_delta: np.ndarray) -> dict[str, np.ndarray]:
    """Parameter gradients for a given upstream dloss/ddelta."""
    cfg = fld.cfg
    h_feat, slot, w, z1, a1, z2, a2 = cache
    grads = {
        "w3": d_delta.T @ a2,
        "b3": d_delta.sum(axis=0),
    }
    da2 = d_delta @ fld.w3
    dz2 = da2 * (z2 > 0)
    grads["w2"] = dz2.T @ a1
    grads["b2"] = dz2.sum(axis=0)
    da1 = dz2 @ fld.w2
    dz1 = da1 * (z1 > 0)
    grads["w1"] = dz1.T @ h_feat
    grads["b1"] = dz1.sum(axis=0)
    dh = dz1 @ fld.w1

    n = dh.shape[0]
    lv, f_dim, t = cfg.levels, cfg.features, cfg.table_size
    dfeat = dh.reshape(n, lv, f_dim)
    contrib = w[:, :, :, None] * dfeat[:, :, None, :]  # (n, L, 8, F)
    flat = (slot[:, :, :, None] * f_dim + np.arange(f_dim, dtype=np.int64)).ravel()
    grads["tables"] = np.bincount(
        flat, weights=contrib.ravel(), minlength=lv * t * f_dim
    ).reshape(lv, t, f_dim)
    return grads


def predict_delta(x_prev: np.ndarray, fld: MotionField) -> np.ndarray:
    """Per-splat position delta; norm-clamped when the field carries a bound."""
    x = np.atleast_2d(np.asarray(x_prev, dtype=np.float64))
    delta, _ = _forward(fld, fld.normalize(x))
    if fld.delta_clamp is not None:
        norms = np.linalg.norm(delta, axis=1, keepdims=True)
        over = norms > fld.delta_clamp
        if np.any(over):
            delta = np.where(over, delta * (fld.delta_clamp / norms), delta)
    return delta


# --- objectives -----------------------------------------------------------


def supervised_l2_objective(target: np.ndarray):
    """Mean squared position error against known per-splat targets."""
    target = np.asarray(target, dtype=np.float64)

    def objective(x_pred: np.ndarray):
        diff = x_pred - target
        n = x_pred.shape[0]
        loss = float(np.sum(diff * diff)) / n
        return loss, 2.0 * diff / n

    return objective


def chamfer_objective(target: np.ndarray):
    """Symmetric chamfer distance (squared) to an unorganized target cloud."""
    target = np.asarray(target, dtype=np.float64)
    target_tree = cKDTree(target)

    def objective(x_pred: np.ndarray):
        n, m = x_pred.shape[0], target.shape[0]
        # pred -> nearest target
        _, j = target_tree.query(x_pred)
        fwd = x_pred - target[j]
        # target -> nearest pred
        _, i = cKDTree(x_pred).query(target)
        bwd = x_pred[i] - target
        loss = float(np.sum(fwd * fwd)) / n + float(np.sum(bwd * bwd)) / m
        grad = 2.0 * fwd / n
        np.add.at(grad, i, 2.0 * bwd / m)
        return loss, grad

    return objective


def chamfer_distance(a: np.ndarray, b: np.ndarray) -> float:
    loss, _ = chamfer_objective(b)(np.asarray(a, dtype=np.float64))
    return loss


# --- fitting --------------------------------------------------------------


def fit_motion(
    x_prev: np.ndarray,
    objective,
    cfg: HashGridConfig | None = None,
    iters: int = DEFAULT_ITERS,
    lr_tables: float = LR_TABLES,
    lr_mlp: float = LR_MLP,
    seed: int = 0,
    callback=None,
) -> MotionField:
    """Optimize a fresh field so x_prev + delta minimizes the objective.

    ``objective(x_pred) -> (loss, dloss/dx_pred)``. Adam per parameter
    group, cosine-decayed learning rate, fixed iteration budget. Raises
    RuntimeError if the loss goes non-finite.
    """
    x_prev = np.asarray(x_prev, dtype=np.float64)
    bbox = Bbox(x_prev.min(axis=0), x_prev.max(axis=0))
    fld = init_motion_field(cfg, seed=seed, bbox=bbox)
    u = fld.normalize(x_prev)

    params = fld.params()
    m = {k: np.zeros_like(v) for k, v in params.items()}
    v = {k: np.zeros_like(p) for k, p in params.items()}
    beta1, beta2, eps = 0.9, 0.999, 1e-8

    for it in range(iters):
        delta, cache = _forward(fld, u)
        loss, d_pred = objective(x_prev + delta)
        if not np.isfinite(loss):
            raise RuntimeError(f"motion fit diverged at iteration {it}: loss={loss}")
        if callback is not None:
            callback(it, loss)
        grads = _backward(fld, cache, np.asarray(d_pred, dtype=np.float64))
        decay = 0.5 * (1.0 + math.cos(math.pi * it / max(iters, 1)))
        for key, p in params.items():
            g = grads[key]
            m[key] = beta1 * m[key] + (1 - beta1) * g
            v[key] = beta2 * v[key] + (1 - beta2) * g * g
            mhat = m[key] / (1 - beta1 ** (it + 1))
            vhat = v[key] / (1 - beta2 ** (it + 1))
            lr = (lr_tables if key == "tables" else lr_mlp) * decay
            p -= lr * mhat / (np.sqrt(vhat) + eps)
    return fld


# --- keyframe pruning -----------------------------------------------------


def prune_survivors(
    opacities: np.ndarray,
    ratio: float = PRUNE_RATIO,
    target_count: int = PRUNE_TARGET,
) -> list[np.ndarray]:
    """Index arrays (into the original ordering) kept after each round.

    Every round removes floor(n * ratio) lowest-opacity splats, ties broken
    stably by index, until the count is <= target_count. Empty list means
    the frame was already small enough.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must be in (0, 1)")
    if target_count < 1:
        raise ValueError("target_count must be >= 1")
    opacities = np.asarray(opacities, dtype=np.float64)
    kept = np.arange(opacities.shape[0])
    rounds = []
    while kept.shape[0] > target_count:
        n = kept.shape[0]
        drop = int(math.floor(n * ratio))
        if drop < 1:
            raise RuntimeError(f"prune stalled at {n} splats (ratio {ratio} removes nothing)")
        order = np.argsort(opacities[kept], kind="stable")
        kept = np.sort(kept[order[drop:]])
        rounds.append(kept.copy())
    return rounds


def prune_keyframe(
    frame: GaussianFrame,
    ratio: float = PRUNE_RATIO,
    target_count: int = PRUNE_TARGET,
    finetune_hook=None,
) -> GaussianFrame:
    """Iterative lowest-opacity pruning down to the target count.

    ``finetune_hook(frame) -> frame`` runs after every round (identity when
    omitted); survivors keep their attributes and relative order bit-exactly.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must be in (0, 1)")
    if target_count < 1:
        raise ValueError("target_count must be >= 1")
    while frame.splat_count > target_count:
        n = frame.splat_count
        drop = int(math.floor(n * ratio))
        if drop < 1:
            raise RuntimeError(f"prune stalled at {n} splats (ratio {ratio} removes nothing)")
        order = np.argsort(frame.opacities, kind="stable")
        frame = frame.select(np.sort(order[drop:]))
        if finetune_hook is not None:
            frame = finetune_hook(frame)
    return frame


# --- checkpoint i/o -------------------------------------------------------
#
# Layout: magic "GVMF", then little-endian u32 fields
#   version, levels, features, table_size, base_resolution, max_resolution,
# then little-endian f64 fields
#   origin[3], extent[3], delta_clamp (inf when unset),
# then the parameter arrays as raw little-endian f64 in order:
#   tables, w1, b1, w2, b2, w3, b3.

_HEADER = struct.Struct("<4s6I")


def save_motion_field(fld: MotionField, path) -> None:
    cfg = fld.cfg
    with open(path, "wb") as fh:
        fh.write(
            _HEADER.pack(
                CHECKPOINT_MAGIC,
                CHECKPOINT_VERSION,
                cfg.levels,
                cfg.features,
                cfg.table_size,
                cfg.base_resolution,
                cfg.max_resolution,
            )
        )
        head = np.concatenate(
            [fld.origin, fld.extent, [math.inf if fld.delta_clamp is None else fld.delta_clamp]]
        )
        fh.write(head.astype("<f8").tobytes())
        for key in ("tables", "w1", "b1", "w2", "b2", "w3", "b3"):
            fh.write(fld.params()[key].astype("<f8").tobytes())


def load_motion_field(path) -> MotionField:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) < _HEADER.size:
            raise ValueError("truncated checkpoint header")
        magic, version, levels, features, table_size, base_res, max_res = _HEADER.unpack(raw)
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"not a motion-field checkpoint (magic {magic!r})")
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        cfg = HashGridConfig(
            levels=levels,
            features=features,
            table_size=table_size,
            base_resolution=base_res,
            max_resolution=max_res,
        )
        body = np.frombuffer(fh.read(), dtype="<f8")

    d_in, h = cfg.feature_dim, HIDDEN_WIDTH
    sizes = [
        3,
        3,
        1,
        cfg.levels * cfg.table_size * cfg.features,
        h * d_in,
        h,
        h * h,
        h,
        3 * h,
        3,
    ]
    if body.size != sum(sizes):
        raise ValueError(f"checkpoint holds {body.size} floats, expected {sum(sizes)}")
    parts = np.split(body, np.cumsum(sizes)[:-1])
    origin, extent, clamp = parts[0], parts[1], float(parts[2][0])
    return MotionField(
        cfg=cfg,
        tables=parts[3].reshape(cfg.levels, cfg.table_size, cfg.features).copy(),
        w1=parts[4].reshape(h, d_in).copy(),
        b1=parts[5].copy(),
        w2=parts[6].reshape(h, h).copy(),
        b2=parts[7].copy(),
        w3=parts[8].reshape(3, h).copy(),
        b3=parts[9].copy(),
        origin=origin.copy(),
        extent=extent.copy(),
        delta_clamp=None if math.isinf(clamp) else clamp,
    )
