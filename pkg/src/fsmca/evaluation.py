"""Metrics, horizon sweeps and algorithm comparison over closed-loop runs."""

from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .mca import McaConfig
from .plant import TrajectoryLog, run_closed_loop
from .scenarios import Scenario

log = logging.getLogger(__name__)

DEFAULT_HORIZONS = (25, 30, 35, 40, 50, 100, 150)
CONSTRAINT_TOL = 1e-6


def rmse_from_errors(err) -> tuple[float, float, float]:
    err = np.asarray(err, dtype=float)
    if err.ndim != 2 or err.shape[1] != 2 or err.shape[0] == 0:
        raise ValueError("need a non-empty (n, 2) error series")
    long, lat = np.sqrt(np.mean(err ** 2, axis=0))
    return float(long), float(lat), math.hypot(long, lat)


def rmse(log_: TrajectoryLog) -> tuple[float, float, float]:
    """(long, lat, total) RMSE of achieved specific force against the scaled reference."""
    if len(log_) == 0:
        raise ValueError("cannot compute RMSE of an empty log")
    return rmse_from_errors(log_.f - log_.f_ref)


def constraint_violations(log_: TrajectoryLog, limits, tol: float = CONSTRAINT_TOL) -> int:
    """Number of logged ticks breaking any hard bound or the slackened tilt-rate bound."""
    if len(log_) == 0:
        return 0
    x = log_.states
    bad = ((np.abs(x[:, :, 0]) > limits.s_max + tol)
           | (np.abs(x[:, :, 1]) > limits.v_max + tol)
           | (np.abs(x[:, :, 2]) > limits.a_max + tol)
           | (np.abs(x[:, :, 3]) > limits.theta_max + tol)
           | (np.abs(x[:, :, 4]) > limits.omega_max + log_.delta + tol)
           | (log_.delta < -tol))
    return int(np.count_nonzero(bad.any(axis=1)))


@dataclass
class RunSummary:
    scenario: str
    mode: str
    N: int
    k_scale: float
    rmse_long: float = math.nan
    rmse_lat: float = math.nan
    rmse_total: float = math.nan
    compute_s: float = math.nan
    mean_solve_ms: float = math.nan
    max_solve_ms: float = math.nan
    total_slack: float = math.nan
    violations: int = 0
    ticks: int = 0
    error: str = ""

    @classmethod
    def from_log(cls, log_: TrajectoryLog, cfg: McaConfig, scenario: str, k_scale: float) -> "RunSummary":
        row = cls(scenario, cfg.mode, cfg.horizon, k_scale, ticks=len(log_), error=log_.error or "")
        if len(log_):
            row.rmse_long, row.rmse_lat, row.rmse_total = rmse(log_)
            row.compute_s = float(log_.solve_ms.sum() / 1e3)
            row.mean_solve_ms = float(log_.solve_ms.mean())
            row.max_solve_ms = float(log_.solve_ms.max())
            row.total_slack = float(log_.delta.sum())
            row.violations = constraint_violations(log_, cfg.limits)
        return row

    def line(self) -> str:
        return (f"{self.scenario:<10} {self.mode:<9} N={self.N:<4} k={self.k_scale:<6g} "
                f"rmse long={self.rmse_long:.4f} lat={self.rmse_lat:.4f} total={self.rmse_total:.4f} "
                f"solve mean={self.mean_solve_ms:.2f}ms max={self.max_solve_ms:.2f}ms "
                f"slack={self.total_slack:.3g} violations={self.violations}"
                + (f" ERROR {self.error}" if self.error else ""))


SUMMARY_COLUMNS = tuple(f.name for f in fields(RunSummary))


def write_summary_csv(rows, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in asdict(r).items()})


def run_summary(cfg: McaConfig, scenario: Scenario, k_scale: float, plant="ideal") -> tuple[RunSummary, TrajectoryLog]:
    log_ = run_closed_loop(cfg, plant, scenario, k_scale)
    return RunSummary.from_log(log_, cfg, scenario.name, k_scale), log_


def _sweep_row(args) -> RunSummary:
    cfg, scenario, k_scale = args
    t0 = time.perf_counter()
    try:
        row, _ = run_summary(cfg, scenario, k_scale)
    except Exception as exc:  # noqa: BLE001 - one bad row must not end the sweep
        log.error("sweep row %s N=%d failed: %r", cfg.mode, cfg.horizon, exc)
        row = RunSummary(scenario.name, cfg.mode, cfg.horizon, k_scale, error=repr(exc))
    log.info("%s N=%d done in %.1fs", cfg.mode, cfg.horizon, time.perf_counter() - t0)
    return row


def sweep_horizons(scenario: Scenario, k_scale: float, horizons=DEFAULT_HORIZONS,
                   base: McaConfig | None = None, modes=("benchmark", "fs"),
                   workers: int = 1, out=None) -> list[RunSummary]:
    """Run every (N, mode) pair on the ideal plant; rows come back in input order."""
    horizons = list(horizons)
    if not horizons:
        raise ValueError("horizons must be non-empty")
    base = base or McaConfig(dt=scenario.dt)
    jobs = [(replace(base, mode=m, horizon=int(n)), scenario, k_scale) for n in horizons for m in modes]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_row, jobs))
    else:
        rows = [_sweep_row(j) for j in jobs]
    if out is not None:
        write_summary_csv(rows, out)
    return rows


def compare(scenario: Scenario, k_scale: float, base: McaConfig | None = None,
            plant="ideal") -> dict[str, RunSummary]:
    base = base or McaConfig(dt=scenario.dt)
    return {m: run_summary(replace(base, mode=m), scenario, k_scale, plant)[0] for m in ("fs", "benchmark")}
