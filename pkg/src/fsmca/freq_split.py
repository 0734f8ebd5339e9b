"""Reference scaling and complementary low/high-frequency splitting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal


@dataclass(frozen=True)
class SplitConfig:
    cutoff_hz: float = 0.5
    scale: float = 1.0
    dt: float = 0.01

    def __post_init__(self):
        if self.cutoff_hz <= 0 or self.scale <= 0 or self.dt <= 0:
            raise ValueError(f"invalid split configuration: {self}")


@dataclass
class ReferenceSet:
    """Per-tick references for both axes.

    Arrays ``f_ref``, ``lf`` and ``hf`` have shape (n, 2) with columns
    (long, lat). ``lf + hf == f_ref`` holds sample by sample.
    """

    t: np.ndarray
    f_ref: np.ndarray
    lf: np.ndarray
    hf: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def lookahead(self, i: int, horizon: int) -> "ReferenceSet":
        """References for ticks ``i .. i + horizon - 1``, holding the last sample."""
        if len(self) == 0:
            raise ValueError("empty reference set")
        idx = np.minimum(np.arange(i, i + horizon), len(self) - 1)
        return ReferenceSet(self.t[idx], self.f_ref[idx], self.lf[idx], self.hf[idx])

    @classmethod
    def zeros(cls, n: int, dt: float = 0.01) -> "ReferenceSet":
        z = np.zeros((n, 2))
        return cls(np.arange(n) * dt, z, z.copy(), z.copy())


def scale_reference(raw, k: float) -> np.ndarray:
    if k <= 0:
        raise ValueError(f"scale must be positive, got {k}")
    return np.asarray(raw, dtype=float) * k


def lowpass_coefficients(cutoff_hz: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """First-order Butterworth low-pass, bilinear transform with prewarping."""
    b, a = signal.butter(1, cutoff_hz, btype="low", fs=1.0 / dt)
    return b, a


def split(scaled, cfg: SplitConfig) -> tuple[np.ndarray, np.ndarray]:
    """Split along axis 0 into (low-frequency, high-frequency) parts.

    The high-frequency part is the residual ``scaled - lf`` so the two always
    sum back to the input.
    """
    scaled = np.asarray(scaled, dtype=float)
    if scaled.shape[0] == 0:
        return scaled.copy(), scaled.copy()
    b, a = lowpass_coefficients(cfg.cutoff_hz, cfg.dt)
    lf = signal.lfilter(b, a, scaled, axis=0)
    return lf, scaled - lf


def build_references(scaled, cfg: SplitConfig) -> ReferenceSet:
    """Package a scaled (n,) or (n, 2) series into a :class:`ReferenceSet`."""
    scaled = np.asarray(scaled, dtype=float)
    if scaled.ndim == 1:
        scaled = np.column_stack([scaled, scaled])
    lf, hf = split(scaled, cfg)
    t = np.arange(scaled.shape[0]) * cfg.dt
    return ReferenceSet(t, scaled, lf, hf)


class StreamingSplitter:
    """Sample-by-sample version of :func:`split` for a single control loop."""

    def __init__(self, cfg: SplitConfig, channels: int = 2):
        self.b, self.a = lowpass_coefficients(cfg.cutoff_hz, cfg.dt)
        self._zi = np.zeros((1, channels))

    def push(self, sample) -> tuple[np.ndarray, np.ndarray]:
        x = np.atleast_1d(np.asarray(sample, dtype=float))
        lf, self._zi = signal.lfilter(self.b, self.a, x[None, :], axis=0, zi=self._zi)
        lf = lf[0]
        return lf, x - lf
