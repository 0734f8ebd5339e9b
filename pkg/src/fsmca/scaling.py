"""Recommended motion scaling from tilt-angle and tilt-rate capability."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import GRAVITY

TILT_MAX = math.pi / 6          # 30 deg, worst-case tilt
TILT_RATE_MAX = math.pi / 60    # 3 deg/s perception threshold
K_MIN = 0.1
K_MAX = 1.0
# exact values at 30 deg so that k_theta(g / 2) == 1
_SIN_TILT = 0.5
_COS_TILT = math.sqrt(3.0) / 2


@dataclass(frozen=True)
class ScaleRecommendation:
    k_theta: float
    k_omega: float
    k_final: float
    max_f: float
    max_fdot: float


def _as_channels(series) -> np.ndarray:
    arr = np.asarray(series, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.shape[0] < 2:
        raise ValueError("need at least 2 samples")
    return arr


def max_abs(series) -> float:
    return float(np.max(np.abs(_as_channels(series))))


def max_abs_derivative(series, dt: float) -> float:
    """Largest |df/dt| using central differences (one-sided at the ends)."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    arr = _as_channels(series)
    return float(np.max(np.abs(np.gradient(arr, dt, axis=0))))


def k_theta(max_f: float) -> float:
    return GRAVITY * _SIN_TILT / max_f if max_f > 0 else math.inf


def k_omega(max_fdot: float) -> float:
    return TILT_RATE_MAX * GRAVITY / max_fdot * _COS_TILT if max_fdot > 0 else math.inf


def recommend_scale(series, dt: float, k_min: float = K_MIN, k_max: float = K_MAX) -> ScaleRecommendation:
    """Recommend a scaling factor for an (n,) or (n, channels) reference.

    Multi-channel input is treated per axis and the most demanding channel
    decides. Unbounded factors (all-zero signal) fall through to ``k_max``.
    """
    mf = max_abs(series)
    mfd = max_abs_derivative(series, dt)
    kt, kw = k_theta(mf), k_omega(mfd)
    k = min(max(min(kt, kw), k_min), k_max)
    return ScaleRecommendation(k_theta=kt, k_omega=kw, k_final=k, max_f=mf, max_fdot=mfd)
