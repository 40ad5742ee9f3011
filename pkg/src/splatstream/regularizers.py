"""Compression-aware training losses with hand-derived gradients.

Two ingredients: a residual entropy loss that estimates the bit cost of
inter-frame attribute residuals under a per-attribute Gaussian probability
model, and an L1 temporal loss between consecutive packed plane sets. Both
return analytic gradients so an external optimizer can consume them without
autodiff. Photometric / D-SSIM terms are supplied by the caller as plain
scalars and only enter through the fixed-weight combination.

The probability of a (noised, normalized) residual is the CDF difference

    P(yhat) = Phi((yhat + 1/2 - mu)/sigma) - Phi((yhat - 1/2 - mu)/sigma)

clamped below at P_MIN so outliers cost a large-but-finite number of bits.
mu and sigma are shared per attribute, not per channel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .layout import AttributeLayout
from .quantize import QuantRange

SIGMA_MIN = 1e-4
P_MIN = 1e-9
_LN2 = math.log(2.0)

DEFAULT_LAMBDA = 0.2
DEFAULT_LAMBDA_E = 1e-4
DEFAULT_LAMBDA_T = 1e-3

# positions are carried by the motion model, not the temporal regularizer
TEMPORAL_ATTRS = ("rotation", "scale", "opacity", "color", "sh")


def _norm_pdf(x: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


@dataclass
class EntropyModel:
    """Per-attribute learnable (mu, sigma) plus quantization region count q.

    sigma is floored at SIGMA_MIN on construction; q must be >= 2.
    """

    mu: dict[str, float]
    sigma: dict[str, float]
    q: dict[str, int]

    def __post_init__(self):
        if set(self.mu) != set(self.sigma) or set(self.mu) != set(self.q):
            raise ValueError("mu/sigma/q must cover the same attributes")
        for name, s in self.sigma.items():
            if not np.isfinite(s):
                raise ValueError(f"non-finite sigma for {name!r}")
            self.sigma[name] = max(float(s), SIGMA_MIN)
        for name, qi in self.q.items():
            if qi < 2:
                raise ValueError(f"q must be >= 2, got {qi} for {name!r}")

    @classmethod
    def for_layout(cls, layout: AttributeLayout, mu: float = 0.0, sigma: float = 1.0) -> "EntropyModel":
        """Defaults aligned with the baking lattice: q = 2^bits - 1."""
        return cls(
            mu={e.name: mu for e in layout.entries if e.channels > 0},
            sigma={e.name: sigma for e in layout.entries if e.channels > 0},
            q={e.name: (1 << e.bits) - 1 for e in layout.entries if e.channels > 0},
        )

    @classmethod
    def single(cls, mu: float = 0.0, sigma: float = 1.0, q: int = 255, name: str = "residual") -> "EntropyModel":
        return cls(mu={name: mu}, sigma={name: sigma}, q={name: q})


@dataclass
class ResidualBatch:
    """Residuals of one attribute: raw delta, noised-normalized yhat, range."""

    delta: np.ndarray
    yhat: np.ndarray
    y_min: np.ndarray
    y_max: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.yhat)):
            raise ValueError("non-finite yhat")


def residual_quantize(
    y_t: np.ndarray,
    y_prev: np.ndarray,
    qrange: QuantRange,
    q_i: int | None = None,
    noise: bool = False,
    seed: int = 0,
) -> ResidualBatch:
    """Simulated rounding of inter-frame residuals.

    yhat = (y_t - y_prev - y_min) / (y_max - y_min) * q_i, plus a seeded
    U(-1/2, 1/2) draw per element when ``noise`` is on. q_i defaults to the
    lattice size 2^bits - 1 of the supplied range.
    """
    y_t = np.asarray(y_t, dtype=np.float64)
    y_prev = np.asarray(y_prev, dtype=np.float64)
    if y_t.shape != y_prev.shape:
        raise ValueError(f"shape mismatch {y_t.shape} vs {y_prev.shape}")
    if q_i is None:
        q_i = qrange.levels
    if q_i < 2:
        raise ValueError(f"q_i must be >= 2, got {q_i}")
    span = qrange.maxs - qrange.mins
    if np.any(span <= 0):
        raise ValueError("zero quantization range")
    delta = y_t - y_prev
    yhat = (delta - qrange.mins) / span * q_i
    if noise:
        u = np.random.default_rng(seed).uniform(-0.5, 0.5, size=yhat.shape)
        yhat = yhat + u
    return ResidualBatch(delta=delta, yhat=yhat, y_min=qrange.mins, y_max=qrange.maxs)


@dataclass
class EntropyLossResult:
    bits: float
    grad_yhat: dict[str, np.ndarray]
    grad_mu: dict[str, float]
    grad_sigma: dict[str, float]
    count: int = field(default=0)


def entropy_loss(yhat, model: EntropyModel) -> EntropyLossResult:
    """Mean bit cost of residuals plus gradients w.r.t. yhat, mu, sigma.

    ``yhat`` is a dict of arrays keyed like the model (a bare array is
    treated as the model's sole attribute). The mean runs over every element
    of every attribute. Elements whose probability hits the P_MIN clamp
    contribute constant bits and zero gradient.
    """
    if isinstance(yhat, np.ndarray):
        if len(model.mu) != 1:
            raise ValueError("bare array input needs a single-attribute model")
        yhat = {next(iter(model.mu)): yhat}
    unknown = set(yhat) - set(model.mu)
    if unknown:
        raise ValueError(f"attributes missing from model: {sorted(unknown)}")

    total = sum(np.asarray(v).size for v in yhat.values())
    if total == 0:
        raise ValueError("empty input")

    bits = 0.0
    grad_yhat: dict[str, np.ndarray] = {}
    grad_mu: dict[str, float] = {}
    grad_sigma: dict[str, float] = {}
    for name in yhat:
        y = np.asarray(yhat[name], dtype=np.float64)
        mu = model.mu[name]
        sigma = model.sigma[name]
        a = (y + 0.5 - mu) / sigma
        b = (y - 0.5 - mu) / sigma
        p_raw = ndtr(a) - ndtr(b)
        clamped = p_raw < P_MIN
        p = np.where(clamped, P_MIN, p_raw)
        bits += float(np.sum(-np.log(p))) / _LN2

        # d(-log2 P)/dx = -(dP/dx) / (P ln 2); zero where the clamp is active
        pdf_a = _norm_pdf(a)
        pdf_b = _norm_pdf(b)
        inv = np.where(clamped, 0.0, 1.0 / (p * sigma * _LN2 * total))
        grad_yhat[name] = -(pdf_a - pdf_b) * inv
        grad_mu[name] = float(np.sum((pdf_a - pdf_b) * inv))
        grad_sigma[name] = float(np.sum((a * pdf_a - b * pdf_b) * inv))

    return EntropyLossResult(
        bits=bits / total,
        grad_yhat=grad_yhat,
        grad_mu=grad_mu,
        grad_sigma=grad_sigma,
        count=total,
    )


def temporal_loss(planes_t, planes_prev) -> tuple[float, dict[str, np.ndarray]]:
    """L1 distance between consecutive plane sets, normalized by plane area.

    Plane sets are dicts attribute -> (..., H, W) float arrays; position is
    excluded (it belongs to the motion model). Returns (value, gradient
    w.r.t. planes_t); the subgradient of |.| at 0 is taken as 0.
    """
    if set(planes_t) != set(planes_prev):
        raise ValueError("plane sets name different attributes")
    if "position" in planes_t:
        raise ValueError("position planes are not temporally regularized")
    if not planes_t:
        raise ValueError("empty plane sets")

    area = None
    value = 0.0
    grads: dict[str, np.ndarray] = {}
    for name in sorted(planes_t):
        cur = np.asarray(planes_t[name], dtype=np.float64)
        prev = np.asarray(planes_prev[name], dtype=np.float64)
        if cur.shape != prev.shape:
            raise ValueError(f"{name}: shape mismatch {cur.shape} vs {prev.shape}")
        if cur.ndim < 2:
            raise ValueError(f"{name}: planes must have spatial dims, got {cur.shape}")
        plane_area = cur.shape[-1] * cur.shape[-2]
        if area is None:
            area = plane_area
        elif plane_area != area:
            raise ValueError("plane sets mix spatial resolutions")
        diff = cur - prev
        value += float(np.sum(np.abs(diff)))
        grads[name] = np.sign(diff) / area
    return value / area, grads


def combine_losses(
    photometric: float,
    dssim: float,
    entropy: float,
    temporal: float,
    lam: float = DEFAULT_LAMBDA,
    lam_e: float = DEFAULT_LAMBDA_E,
    lam_t: float = DEFAULT_LAMBDA_T,
) -> float:
    """(1-lam)*photometric + lam*dssim + lam_e*entropy + lam_t*temporal."""
    return (1.0 - lam) * photometric + lam * dssim + lam_e * entropy + lam_t * temporal
