"""Plants for closed-loop runs and the simulation harness that drives them."""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import expm

from .freq_split import build_references, scale_reference
from .mca import McaConfig, MotionCueing
from .model import ControlInput, PlatformState, output_array, step_array
from .scenarios import Scenario

log = logging.getLogger(__name__)

OMEGA_TH = math.radians(3.0)
LOG_COLUMNS = ("t", "axis", "f_ref", "lf_ref", "hf_ref", "f", "G", "a", "s", "v",
               "theta", "omega", "delta", "iters", "solve_ms")


class IdealPlant:
    """The controller's own internal model."""

    name = "ideal"

    def reset(self) -> None:
        pass

    def step(self, x: np.ndarray, u: np.ndarray, dt: float) -> np.ndarray:
        return step_array(x, u, dt)


@dataclass
class SurrogatePlant:
    """Stand-in for a real motion system: lagged jerk tracking plus tilt-rate saturation.

    Every jerk channel passes through a unit-gain second-order lag before it
    reaches the triple integrator; the achieved tilt rate is clipped to
    ``rate_limit_omega``.
    """

    omega_n: float = 20.0
    zeta: float = 0.9
    rate_limit_omega: float = 1.05 * OMEGA_TH
    name: str = "surrogate"
    _lag: np.ndarray = field(default=None, init=False, repr=False)
    _disc: tuple = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.omega_n <= 0 or not 0 < self.zeta <= 2:
            raise ValueError("need omega_n > 0 and 0 < zeta <= 2")
        self.reset()

    def reset(self) -> None:
        # (axis, channel, [jerk, jerk rate]); channel 0 translation, 1 tilt
        self._lag = np.zeros((2, 2, 2))

    def _discretize(self, dt: float):
        if self._disc is None or self._disc[0] != dt:
            wn, z = self.omega_n, self.zeta
            # state: [p, q, r, y, ydot]; p''' = y, y'' = wn^2 (u - y) - 2 z wn y'
            Ac = np.zeros((5, 5))
            Ac[0, 1] = Ac[1, 2] = Ac[2, 3] = Ac[3, 4] = 1.0
            Ac[4, 3] = -wn * wn
            Ac[4, 4] = -2 * z * wn
            Bc = np.zeros(5)
            Bc[4] = wn * wn
            aug = np.zeros((6, 6))
            aug[:5, :5] = Ac
            aug[:5, 5] = Bc
            E = expm(aug * dt)
            self._disc = (dt, E[:5, :5], E[:5, 5])
        return self._disc[1], self._disc[2]

    def step(self, x: np.ndarray, u: np.ndarray, dt: float) -> np.ndarray:
        Ad, Bd = self._discretize(dt)
        x = np.asarray(x, dtype=float).reshape(2, 6)
        u = np.asarray(u, dtype=float).reshape(2, 2)
        out = np.empty_like(x)
        for axis in range(2):
            for ch, col in ((0, 0), (1, 3)):
                full = np.r_[x[axis, col:col + 3], self._lag[axis, ch]]
                nxt = Ad @ full + Bd * u[axis, ch]
                out[axis, col:col + 3] = nxt[:3]
                self._lag[axis, ch] = nxt[3:]
        # a saturated rate stops changing in the saturating direction
        sat = np.abs(out[:, 4]) > self.rate_limit_omega
        out[:, 4] = np.clip(out[:, 4], -self.rate_limit_omega, self.rate_limit_omega)
        outward = sat & (np.sign(out[:, 5]) == np.sign(out[:, 4]))
        out[outward, 5] = 0.0
        return out

    @property
    def achieved_jerk(self) -> np.ndarray:
        return self._lag[:, :, 0].copy()


def make_plant(kind: str, **params):
    if kind == "ideal":
        return IdealPlant()
    if kind == "surrogate":
        return SurrogatePlant(**params)
    raise ValueError(f"unknown plant {kind!r}")


def plant_step(plant, x: PlatformState, u: ControlInput, dt: float) -> PlatformState:
    return PlatformState.from_array(plant.step(x.as_array(), u.as_array(), dt))


@dataclass
class TrajectoryLog:
    """Closed-loop time series; per-axis arrays have shape (n, 2)."""

    t: np.ndarray
    f_ref: np.ndarray
    lf_ref: np.ndarray
    hf_ref: np.ndarray
    states: np.ndarray          # (n, 2, 6) achieved
    outputs: np.ndarray         # (n, 2, 3) achieved (f, G, a)
    commands: np.ndarray        # (n, 2, 2) applied (jerk, angular jerk)
    delta: np.ndarray           # (n, 2) tilt-rate slack covering each logged state
    iters: np.ndarray           # (n,)
    solve_ms: np.ndarray        # (n,)
    status: list = field(default_factory=list)
    emergency_slack: np.ndarray | None = None
    flags: list = field(default_factory=list)
    error: str | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def f(self) -> np.ndarray:
        return self.outputs[:, :, 0]

    def column(self, name: str) -> np.ndarray:
        """(n, 2) per-axis series for a CSV column name."""
        direct = {"f_ref": self.f_ref, "lf_ref": self.lf_ref, "hf_ref": self.hf_ref, "delta": self.delta}
        if name in direct:
            return direct[name]
        out = {"f": 0, "G": 1, "a": 2}
        if name in out:
            return self.outputs[:, :, out[name]]
        st = {"s": 0, "v": 1, "theta": 3, "omega": 4, "alpha": 5}
        return self.states[:, :, st[name]]

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(LOG_COLUMNS)
            for i in range(len(self)):
                for ax, name in enumerate(("long", "lat")):
                    w.writerow([repr(float(self.t[i])), name,
                                *(repr(float(self.column(c)[i, ax])) for c in LOG_COLUMNS[2:13]),
                                int(self.iters[i]), repr(float(self.solve_ms[i]))])

    @classmethod
    def read_csv(cls, path) -> dict:
        """Parse a log CSV into ``{column: (n, 2) array}`` (``t``, ``iters``, ``solve_ms`` are (n,))."""
        with Path(path).open(newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows or list(rows[0].keys()) != list(LOG_COLUMNS):
            raise ValueError(f"{path}: not a trajectory log")
        long_rows, lat_rows = rows[0::2], rows[1::2]
        out = {"t": np.array([float(r["t"]) for r in long_rows]),
               "iters": np.array([int(r["iters"]) for r in long_rows]),
               "solve_ms": np.array([float(r["solve_ms"]) for r in long_rows])}
        for c in LOG_COLUMNS[2:13]:
            out[c] = np.column_stack([[float(r[c]) for r in long_rows], [float(r[c]) for r in lat_rows]])
        return out


def run_closed_loop(cfg: McaConfig, plant, scenario: Scenario, k_scale: float,
                    x0=None, progress=None, abort_factor: float = 10.0) -> TrajectoryLog:
    """Simulate the cueing loop over a scenario.

    Tick ``i`` sees the measured state at sample ``i`` and references for
    samples ``i+1 .. i+N``; the logged row ``i`` is the achieved sample ``i+1``.
    The run stops with ``error`` set once the displacement exceeds
    ``abort_factor * s_max`` or the tilt leaves +-90 deg.
    """
    if isinstance(plant, str):
        plant = make_plant(plant)
    if abs(scenario.dt - cfg.dt) > 1e-12:
        raise ValueError(f"scenario dt {scenario.dt} differs from controller dt {cfg.dt}")
    plant.reset()
    refs = build_references(scale_reference(scenario.accel(), k_scale), cfg.split_config(k_scale))
    ctrl = MotionCueing(cfg)
    n = max(len(refs) - 1, 0)
    x = np.zeros((2, 6)) if x0 is None else np.asarray(
        x0.as_array() if hasattr(x0, "as_array") else x0, dtype=float).reshape(2, 6)

    states = np.zeros((n, 2, 6))
    commands = np.zeros((n, 2, 2))
    delta = np.zeros((n, 2))
    iters = np.zeros(n, dtype=int)
    solve_ms = np.zeros(n)
    emergency = np.zeros(n)
    status, flags = [], []
    error = None
    done = 0
    for i in range(n):
        look = refs.lookahead(i + 1, cfg.horizon)
        t0 = time.perf_counter()
        try:
            u, sol = ctrl.tick(x, look)
        except Exception as exc:  # noqa: BLE001 - keep the partial log
            error = f"tick {i}: {exc!r}"
            log.error("closed loop aborted at %s", error)
            break
        solve_ms[i] = (time.perf_counter() - t0) * 1e3
        cmd = sol.first_input
        x = plant.step(x, cmd, cfg.dt)
        states[i] = x
        commands[i] = cmd
        delta[i] = sol.slack[0]
        iters[i] = sol.iterations
        emergency[i] = sol.emergency_slack
        status.append(sol.status)
        if np.any(np.abs(x[:, 0]) > 1.02 * cfg.limits.s_max) or np.any(np.abs(x[:, 3]) > 1.02 * cfg.limits.theta_max):
            flags.append((i, "workspace overshoot"))
        done = i + 1
        if np.any(np.abs(x[:, 0]) > abort_factor * cfg.limits.s_max) or np.any(np.abs(x[:, 3]) > np.pi / 2):
            error = f"tick {i}: platform diverged (max |s| {np.abs(x[:, 0]).max():.3g} m)"
            log.error("closed loop aborted at %s", error)
            break
        if progress is not None:
            progress(i, n)

    sl = slice(1, done + 1)
    return TrajectoryLog(t=refs.t[sl], f_ref=refs.f_ref[sl], lf_ref=refs.lf[sl], hf_ref=refs.hf[sl],
                         states=states[:done], outputs=np.stack([output_array(s) for s in states[:done]])
                         if done else np.zeros((0, 2, 3)),
                         commands=commands[:done], delta=delta[:done], iters=iters[:done],
                         solve_ms=solve_ms[:done], status=status, emergency_slack=emergency[:done],
                         flags=flags, error=error,
                         meta={"scenario": scenario.name, "mode": cfg.mode, "N": cfg.horizon,
                               "k_scale": k_scale, "plant": getattr(plant, "name", str(plant))})
