"""Per-tick motion cueing controllers (frequency-splitting and benchmark)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

from .freq_split import ReferenceSet, SplitConfig
from .model import ControlInput, PlatformState
from .mpc import (MODES, BrakingParams, Limits, MpcSolution, MpcSolver, Weights,
                  WashoutParams, build_problem)


@dataclass(frozen=True)
class McaConfig:
    mode: str = "fs"
    horizon: int = 40
    dt: float = 0.01
    weights: Weights = field(default_factory=Weights)
    limits: Limits = field(default_factory=Limits)
    braking: BrakingParams = field(default_factory=BrakingParams)
    cutoff_hz: float = 0.5
    washout: WashoutParams = field(default_factory=WashoutParams)
    max_iter: int = 200

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    def split_config(self, scale: float = 1.0) -> SplitConfig:
        return SplitConfig(cutoff_hz=self.cutoff_hz, scale=scale, dt=self.dt)

    @classmethod
    def from_mapping(cls, params: dict, **overrides) -> "McaConfig":
        """Build from flat parameter names (``w_fspec``, ``omega_max``, ``T_brk_s``, ...).

        Angles are given in degrees (``omega_max`` in deg/s, ``theta_max`` in
        deg), everything else in SI units.
        """
        params = {**params, **overrides}
        groups = {"weights": Weights, "limits": Limits, "braking": BrakingParams, "washout": WashoutParams}
        kwargs, used = {}, set()
        for name, klass in groups.items():
            sub = {}
            for f in fields(klass):
                if f.name in params:
                    value = params[f.name]
                    if klass is Limits and f.name in ("omega_max", "theta_max"):
                        value = math.radians(value)
                    sub[f.name] = value
                    used.add(f.name)
            kwargs[name] = klass(**sub)
        for f in fields(cls):
            if f.name in params and f.name not in groups:
                kwargs[f.name] = params[f.name]
                used.add(f.name)
        unknown = set(params) - used
        if unknown:
            raise ValueError(f"unknown configuration keys: {sorted(unknown)}")
        return cls(**kwargs)


class MotionCueing:
    """Maps (measured state, reference lookahead) to this tick's jerk command."""

    def __init__(self, cfg: McaConfig = McaConfig()):
        self.cfg = cfg
        self.solver = MpcSolver(cfg.horizon, cfg.dt, cfg.limits, cfg.braking, max_iter=cfg.max_iter)

    def reset(self) -> None:
        self.solver.reset()

    def problem(self, x_measured, lookahead: ReferenceSet):
        cfg = self.cfg
        return build_problem(x_measured, lookahead, cfg.weights, cfg.limits, cfg.braking,
                             cfg.mode, cfg.dt, cfg.washout, horizon=cfg.horizon)

    def tick(self, x_measured, lookahead: ReferenceSet) -> tuple[ControlInput, MpcSolution]:
        sol = self.solver.solve(self.problem(x_measured, lookahead))
        return ControlInput.from_array(sol.first_input), sol


def tick(cfg: McaConfig, x_measured: PlatformState, lookahead: ReferenceSet,
         controller: MotionCueing | None = None) -> tuple[ControlInput, MpcSolution]:
    """One-shot tick; pass ``controller`` to keep warm-start state across calls."""
    controller = controller or MotionCueing(cfg)
    return controller.tick(x_measured, lookahead)
