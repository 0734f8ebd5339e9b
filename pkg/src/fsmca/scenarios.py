"""Reference acceleration scenarios: step, multi-sine, slalom and CSV drives."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MULTISINE_FREQS = (0.1, 0.15, 0.2, 0.5)
MULTISINE_AMPS = (1.0, 0.8, 0.1, 0.6)


class ScenarioError(ValueError):
    """Malformed scenario input."""


@dataclass
class Scenario:
    name: str
    dt: float
    ax: np.ndarray
    ay: np.ndarray

    def __post_init__(self):
        self.ax = np.asarray(self.ax, dtype=float)
        self.ay = np.asarray(self.ay, dtype=float)
        if self.ax.shape != self.ay.shape:
            raise ScenarioError("ax and ay must have equal length")

    @property
    def t(self) -> np.ndarray:
        return np.arange(len(self.ax)) * self.dt

    @property
    def duration(self) -> float:
        return (len(self.ax) - 1) * self.dt

    def accel(self) -> np.ndarray:
        """(n, 2) array with columns (long, lat)."""
        return np.column_stack([self.ax, self.ay])

    def truncated(self, duration: float) -> "Scenario":
        n = int(round(duration / self.dt)) + 1
        return Scenario(self.name, self.dt, self.ax[:n], self.ay[:n])


def _grid(duration: float, dt: float) -> np.ndarray:
    if dt <= 0:
        raise ValueError("dt must be positive")
    return np.arange(int(round(duration / dt)) + 1) * dt


def step_signal(t, start=2.0, hold=8.0, level=0.8):
    t = np.asarray(t, dtype=float)
    return np.where((t >= start - 1e-9) & (t < start + hold - 1e-9), level, 0.0)


def make_step(dt: float = 0.01, rest_before: float = 2.0, hold: float = 8.0,
              rest_after: float = 10.0, level: float = 0.8) -> Scenario:
    t = _grid(rest_before + hold + rest_after, dt)
    a = step_signal(t, rest_before, hold, level)
    return Scenario("step", dt, a, a.copy())


def multisine(t):
    t = np.asarray(t, dtype=float)
    return sum(A * np.sin(2 * np.pi * f * t) for f, A in zip(MULTISINE_FREQS, MULTISINE_AMPS))


def make_multisine(dt: float = 0.01, duration: float = 50.0) -> Scenario:
    a = multisine(_grid(duration, dt))
    return Scenario("multisine", dt, a, a.copy())


def slalom(t, amplitude=4.0, freq=0.2, ramp=5.0, long_amplitude=0.5, long_freq=0.05):
    """Lateral sine with a raised-cosine ramp-in plus a slow longitudinal component."""
    t = np.asarray(t, dtype=float)
    env = np.where(t < ramp, 0.5 * (1 - np.cos(np.pi * np.clip(t, 0, ramp) / ramp)), 1.0)
    ay = amplitude * env * np.sin(2 * np.pi * freq * t)
    ax = long_amplitude * np.sin(2 * np.pi * long_freq * t)
    return ax, ay


def make_synthetic_slalom(dt: float = 0.01, duration: float = 50.0) -> Scenario:
    ax, ay = slalom(_grid(duration, dt))
    return Scenario("slalom", dt, ax, ay)


def load_drive_csv(path, dt: float = 0.01, max_duration: float = 50.0) -> Scenario:
    """Read a ``t,ax,ay`` CSV and resample it to ``dt`` by linear interpolation."""
    path = Path(path)
    rows = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ScenarioError(f"{path}: empty file")
        header = [h.strip() for h in header]
        missing = {"t", "ax", "ay"} - set(header)
        if missing:
            raise ScenarioError(f"{path}: missing columns {sorted(missing)}")
        cols = [header.index(c) for c in ("t", "ax", "ay")]
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                vals = [float(row[c]) for c in cols]
            except (IndexError, ValueError):
                raise ScenarioError(f"{path}: malformed row {lineno}: {row!r}") from None
            if not all(math.isfinite(v) for v in vals):
                raise ScenarioError(f"{path}: non-finite value in row {lineno}")
            if rows and vals[0] <= rows[-1][0]:
                raise ScenarioError(f"{path}: time not strictly increasing at row {lineno}")
            rows.append(vals)
    if len(rows) < 2:
        raise ScenarioError(f"{path}: need at least two data rows")
    data = np.array(rows)
    t = data[:, 0] - data[0, 0]
    span = min(t[-1], max_duration)
    grid = np.arange(int(math.floor(span / dt + 1e-9)) + 1) * dt
    ax = np.interp(grid, t, data[:, 1])
    ay = np.interp(grid, t, data[:, 2])
    return Scenario(path.stem, dt, ax, ay)


def get_scenario(name: str, dt: float = 0.01) -> Scenario:
    """Resolve ``step``, ``multisine``, ``slalom`` or ``csv:PATH``."""
    if name.startswith("csv:"):
        return load_drive_csv(name[4:], dt)
    makers = {"step": make_step, "multisine": make_multisine, "slalom": make_synthetic_slalom}
    if name not in makers:
        raise ScenarioError(f"unknown scenario {name!r}")
    return makers[name](dt)
