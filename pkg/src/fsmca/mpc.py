"""Receding-horizon cueing problem: condensed cost, constraints and SQP solve.

Decision vector layout (each block has ``N`` entries, one per step)::

    [j_long, jang_long, j_lat, jang_lat, delta_long, delta_lat]

Predicted step ``k`` (1-based) is the state after applying inputs
``0 .. k-1``. Cost terms are averaged over the horizon.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .freq_split import ReferenceSet
from .model import GRAVITY, integrator_matrices
from .qp import BlockHessian, solve_qp

MODES = ("fs", "benchmark")


@dataclass(frozen=True)
class Weights:
    w_fspec: float = 5.0
    w_G: float = 1.0
    w_ahex: float = 1.0
    w_j: float = 1e-2
    w_angj: float = 1e-3
    # fixed washout weights, used only when adaptive washout is switched off
    w_s: float = 1.0
    w_theta: float = 1.0
    w_delta: float = 1e5

    def __post_init__(self):
        for name, value in vars(self).items():
            if value < 0:
                raise ValueError(f"weight {name} must be non-negative")
        if self.w_delta <= 0:
            raise ValueError("w_delta must be positive")


@dataclass(frozen=True)
class Limits:
    """Platform limits in SI units (rad, rad/s, m/s, m/s^2, m)."""

    omega_max: float = math.radians(3.0)
    theta_max: float = math.radians(30.0)
    v_max: float = 7.2
    a_max: float = 9.81
    s_max: float = 0.5

    def __post_init__(self):
        for name, value in vars(self).items():
            if not value > 0:
                raise ValueError(f"limit {name} must be positive")

    @classmethod
    def unbounded(cls) -> "Limits":
        return cls(*(math.inf,) * 5)


@dataclass(frozen=True)
class BrakingParams:
    c_v: float = 1.0
    c_omega: float = 1.0
    c_u: float = 0.45
    T_brk_s: float = 2.5
    T_brk_theta: float = 0.5

    def __post_init__(self):
        if self.T_brk_s <= 0 or self.T_brk_theta <= 0:
            raise ValueError("braking horizons must be positive")
        for c in (self.c_v, self.c_omega, self.c_u):
            if not 0 < c <= 1:
                raise ValueError("braking coefficients must lie in (0, 1]")


@dataclass(frozen=True)
class WashoutParams:
    k1: float = 1.0
    k2: float = 50.0
    k3: float = 0.1
    Delta: float = 0.01
    adaptive: bool = True


def adaptive_washout_weights(x, k1=1.0, k2=50.0, k3=0.1, Delta=0.01,
                             s_max=0.5, theta_max=math.radians(30.0)):
    """Position and tilt washout weights for each axis of a (2, 6) state.

    The weights grow as the platform approaches its displacement or tilt
    limit, peaking at ``k1 / Delta`` and ``k3 / Delta`` on the boundary.
    """
    x = np.asarray(x, dtype=float).reshape(-1, 6)
    w_s = k1 / (k2 * (np.abs(x[:, 0]) - s_max) ** 2 + Delta)
    w_theta = k3 / (k2 * (np.abs(x[:, 3]) - theta_max) ** 2 + Delta)
    return w_s, w_theta


def braking_displacement(s, v, a, p: BrakingParams = BrakingParams()):
    return s + p.c_v * v * p.T_brk_s + 0.5 * p.c_u * a * p.T_brk_s ** 2


def braking_tilt(theta, omega, alpha, p: BrakingParams = BrakingParams()):
    return theta + p.c_omega * omega * p.T_brk_theta + 0.5 * p.c_u * alpha * p.T_brk_theta ** 2


@dataclass
class MpcProblem:
    N: int
    dt: float
    x0: np.ndarray              # (2, 6) measured state
    f_ref: np.ndarray           # (N, 2)
    lf_ref: np.ndarray          # (N, 2)
    hf_ref: np.ndarray          # (N, 2)
    weights: Weights
    w_s: np.ndarray             # (2,) washout weight per axis, held over the horizon
    w_theta: np.ndarray         # (2,)
    limits: Limits
    braking: BrakingParams
    mode: str = "fs"
    # "linear" replaces g*sin(theta) by g*theta (used for oracle checks)
    tilt_model: str = "nonlinear"

    def effective_output_weights(self) -> tuple[float, float, float]:
        w = self.weights
        if self.mode == "benchmark":
            return w.w_fspec, 0.0, 0.0
        return w.w_fspec, w.w_G, w.w_ahex


def build_problem(x0, refs: ReferenceSet, weights: Weights = Weights(), limits: Limits = Limits(),
                  braking: BrakingParams = BrakingParams(), mode: str = "fs", dt: float = 0.01,
                  washout: WashoutParams = WashoutParams(), horizon: int | None = None,
                  tilt_model: str = "nonlinear") -> MpcProblem:
    """Assemble the horizon problem from the measured state and reference lookahead."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    x0 = np.asarray(x0.as_array() if hasattr(x0, "as_array") else x0, dtype=float).reshape(2, 6)
    N = len(refs)
    if N < 1 or (horizon is not None and horizon != N):
        raise ValueError(f"reference lookahead has {N} samples, horizon is {horizon}")
    if washout.adaptive:
        w_s, w_theta = adaptive_washout_weights(x0, washout.k1, washout.k2, washout.k3,
                                                washout.Delta, limits.s_max, limits.theta_max)
        if not math.isfinite(limits.s_max):
            w_s = np.zeros(2)
        if not math.isfinite(limits.theta_max):
            w_theta = np.zeros(2)
    else:
        w_s, w_theta = np.full(2, weights.w_s), np.full(2, weights.w_theta)
    return MpcProblem(N=N, dt=dt, x0=x0, f_ref=np.asarray(refs.f_ref, float).reshape(N, 2),
                      lf_ref=np.asarray(refs.lf, float).reshape(N, 2),
                      hf_ref=np.asarray(refs.hf, float).reshape(N, 2), weights=weights,
                      w_s=np.asarray(w_s, float), w_theta=np.asarray(w_theta, float),
                      limits=limits, braking=braking, mode=mode, tilt_model=tilt_model)


@dataclass
class MpcSolution:
    inputs: np.ndarray          # (N, 2, 2): per step, rows (long, lat), cols (jerk, angular jerk)
    states: np.ndarray          # (N, 2, 6) predicted states at steps 1..N
    outputs: np.ndarray         # (N, 2, 3) predicted (f, G, a)
    slack: np.ndarray           # (N, 2) tilt-rate slack
    iterations: int
    objective: float
    status: str                 # "optimal" | "max-iterations" | "infeasible-relaxed"
    emergency_slack: float = 0.0
    qp_iterations: int = 0
    merit_history: list[float] = field(default_factory=list)
    step_norm: float = float("nan")
    solve_time: float = 0.0

    @property
    def total_slack(self) -> float:
        return float(self.slack.sum())

    @property
    def first_input(self) -> np.ndarray:
        return self.inputs[0]


@lru_cache(maxsize=32)
def prediction_matrices(N: int, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Condensed triple-integrator prediction.

    Returns ``(Phi, Gam)`` with shapes (3, N, 3) and (3, N, N) such that the
    component ``c`` of the state at step ``k + 1`` is
    ``Phi[c, k] @ x0 + Gam[c, k] @ u``.
    """
    A, B = integrator_matrices(dt)
    Phi = np.empty((3, N, 3))
    impulse = np.empty((N, 3))
    Ak = np.eye(3)
    for k in range(N):
        impulse[k] = Ak @ B
        Ak = A @ Ak
        Phi[:, k, :] = Ak
    Gam = np.zeros((3, N, N))
    for k in range(N):
        Gam[:, k, : k + 1] = impulse[k::-1].T
    Phi.setflags(write=False)
    Gam.setflags(write=False)
    return Phi, Gam


# row blocks of the constraint matrix, each N rows
_AXIS_BLOCKS = ("s+", "s-", "v+", "v-", "a+", "a-", "th+", "th-", "thb+", "thb-", "om+", "om-", "dl")
_BRAKING_BLOCKS = ("thb+", "thb-")
N_BLOCKS = 2 * len(_AXIS_BLOCKS) + 1
MERIT_PENALTY = 1e6
# relative excess over s_max that triggers a new displacement cut
CUT_TOL = 1e-10


class MpcSolver:
    """Gauss-Newton SQP for one platform; owns warm-start state between ticks."""

    def __init__(self, N: int, dt: float, limits: Limits = Limits(),
                 braking: BrakingParams = BrakingParams(), max_iter: int = 200,
                 step_tol: float = 1e-8, warm_start: bool = True):
        if N < 1 or dt <= 0:
            raise ValueError("need N >= 1 and dt > 0")
        self.N, self.dt = N, dt
        self.limits, self.braking = limits, braking
        self.max_iter = max_iter
        self.step_tol = step_tol
        self.warm_start = warm_start
        self.nz = 6 * N
        self.Phi, self.Gam = prediction_matrices(N, dt)
        Gs, Gv, Ga = self.Gam
        self.GsGs = Gs.T @ Gs
        self.GaGa = Ga.T @ Ga
        # displacement braking map: s_brk = Phi_bs x + Gam_bs u (same for tilt with its params)
        b = braking
        self.Phi_bs = self.Phi[0] + b.c_v * b.T_brk_s * self.Phi[1] + 0.5 * b.c_u * b.T_brk_s ** 2 * self.Phi[2]
        self.Gam_bs = Gs + b.c_v * b.T_brk_s * Gv + 0.5 * b.c_u * b.T_brk_s ** 2 * Ga
        self.Phi_bt = self.Phi[0] + b.c_omega * b.T_brk_theta * self.Phi[1] + 0.5 * b.c_u * b.T_brk_theta ** 2 * self.Phi[2]
        self.Gam_bt = Gs + b.c_omega * b.T_brk_theta * Gv + 0.5 * b.c_u * b.T_brk_theta ** 2 * Ga
        self._static = self._static_rows()
        self._block_index = {}
        for axis in range(2):
            for bi, name in enumerate(_AXIS_BLOCKS):
                self._block_index[(axis, name)] = axis * len(_AXIS_BLOCKS) + bi
        self.reset()

    # ------------------------------------------------------------------ layout
    def _col(self, axis: int, var: str) -> slice:
        N = self.N
        start = {"j": 2 * axis * N, "jang": (2 * axis + 1) * N, "delta": (4 + axis) * N}[var]
        return slice(start, start + N)

    def _rows_of(self, axis: int, name: str) -> slice:
        bi = self._block_index[(axis, name)]
        return slice(bi * self.N, (bi + 1) * self.N)

    def reset(self) -> None:
        self._z = None
        self._working: list[int] = []
        self._cuts = (np.zeros(0, dtype=int), np.zeros((0, 2)))

    def _static_rows(self) -> sp.csr_matrix:
        N, nz = self.N, self.nz
        Gs, Gv, Ga = self.Gam
        eye = np.eye(N)
        blocks = []
        for axis in range(2):
            cj, ca, cd = self._col(axis, "j"), self._col(axis, "jang"), self._col(axis, "delta")
            for mat, col in ((Gs, cj), (Gv, cj), (Ga, cj), (Gs, ca), (self.Gam_bt, ca)):
                for sign in (1.0, -1.0):
                    M = np.zeros((N, nz))
                    M[:, col] = sign * mat
                    blocks.append(M)
            for sign in (1.0, -1.0):
                M = np.zeros((N, nz))
                M[:, ca] = sign * Gv
                M[:, cd] = -eye
                blocks.append(M)
            M = np.zeros((N, nz))
            M[:, cd] = -eye
            blocks.append(M)
        return sp.csr_matrix(np.vstack(blocks))

    # ------------------------------------------------------------- prediction
    def predict(self, problem: MpcProblem, z: np.ndarray) -> np.ndarray:
        """Predicted states (N, 2, 6) for decision vector ``z``."""
        X = np.empty((self.N, 2, 6))
        for axis in range(2):
            xt, xr = problem.x0[axis, :3], problem.x0[axis, 3:]
            j, ja = z[self._col(axis, "j")], z[self._col(axis, "jang")]
            for c in range(3):
                X[:, axis, c] = self.Phi[c] @ xt + self.Gam[c] @ j
                X[:, axis, 3 + c] = self.Phi[c] @ xr + self.Gam[c] @ ja
        return X

    def _tilt(self, problem: MpcProblem, theta):
        if problem.tilt_model == "linear":
            return GRAVITY * theta, np.full_like(theta, GRAVITY)
        return GRAVITY * np.sin(theta), GRAVITY * np.cos(theta)

    def objective(self, problem: MpcProblem, z: np.ndarray) -> float:
        """Horizon-averaged cost of ``z`` under the full (nonlinear) tilt model."""
        wf, wg, wa = problem.effective_output_weights()
        w = problem.weights
        X = self.predict(problem, z)
        total = 0.0
        for axis in range(2):
            G, _ = self._tilt(problem, X[:, axis, 3])
            a = X[:, axis, 2]
            total += wf * np.sum((a + G - problem.f_ref[:, axis]) ** 2)
            total += wg * np.sum((G - problem.lf_ref[:, axis]) ** 2)
            total += wa * np.sum((a - problem.hf_ref[:, axis]) ** 2)
            total += problem.w_s[axis] * np.sum(X[:, axis, 0] ** 2)
            total += problem.w_theta[axis] * np.sum(X[:, axis, 3] ** 2)
            total += w.w_j * np.sum(z[self._col(axis, "j")] ** 2)
            total += w.w_angj * np.sum(z[self._col(axis, "jang")] ** 2)
            total += w.w_delta * np.sum(z[self._col(axis, "delta")] ** 2)
        return float(total / self.N)

    def displacement_violation(self, problem: MpcProblem, z: np.ndarray) -> float:
        """Summed excess of the resultant braking displacement over ``s_max``."""
        s_brk = self._braking_displacement(problem, z)
        return float(np.sum(np.maximum(np.linalg.norm(s_brk, axis=1) - problem.limits.s_max, 0.0)))

    def merit(self, problem: MpcProblem, z: np.ndarray) -> float:
        """Objective plus an exact penalty on the (nonlinear) norm constraint."""
        return self.objective(problem, z) + MERIT_PENALTY * self.displacement_violation(problem, z)

    # --------------------------------------------------------------- QP data
    def _braking_displacement(self, problem: MpcProblem, z: np.ndarray) -> np.ndarray:
        """(N, 2) predicted braking displacement per step and axis."""
        return np.column_stack([self.Phi_bs @ problem.x0[ax, :3] + self.Gam_bs @ z[self._col(ax, "j")]
                                for ax in range(2)])

    def cost_terms(self, problem: MpcProblem, z: np.ndarray):
        """Gauss-Newton Hessian blocks and gradient at linearization point ``z``.

        Returns ``(blocks, grad)`` where ``blocks`` is a list suitable for
        :class:`BlockHessian` and the QP is ``0.5 z'Hz + grad'z``.
        """
        N = self.N
        Gs, Gv, Ga = self.Gam
        wf, wg, wa = problem.effective_output_weights()
        w = problem.weights
        scale = 2.0 / N
        blocks, grad = [], np.zeros(self.nz)
        eye = np.eye(N)
        for axis in range(2):
            xt, xr = problem.x0[axis, :3], problem.x0[axis, 3:]
            ja = z[self._col(axis, "jang")]
            s0, a0 = self.Phi[0] @ xt, self.Phi[2] @ xt
            th0 = self.Phi[0] @ xr
            th_bar = th0 + Gs @ ja
            G_bar, c = self._tilt(problem, th_bar)
            G0 = G_bar - c * th_bar + c * th0          # G at jang = 0 on the tangent
            cGs = c[:, None] * Gs
            r_f = a0 + G0 - problem.f_ref[:, axis]
            r_G = G0 - problem.lf_ref[:, axis]
            r_a = a0 - problem.hf_ref[:, axis]
            Hjj = (wf + wa) * self.GaGa + problem.w_s[axis] * self.GsGs + w.w_j * eye
            Hja = wf * (Ga.T @ cGs)
            Haa = (wf + wg) * (cGs.T @ cGs) + problem.w_theta[axis] * self.GsGs + w.w_angj * eye
            H = np.block([[Hjj, Hja], [Hja.T, Haa]]) * scale
            blocks.append((2 * axis * N, H))
            grad[self._col(axis, "j")] = scale * (Ga.T @ (wf * r_f + wa * r_a) + problem.w_s[axis] * (Gs.T @ s0))
            grad[self._col(axis, "jang")] = scale * (cGs.T @ (wf * r_f + wg * r_G)
                                                     + problem.w_theta[axis] * (Gs.T @ th0))
        blocks.append((4 * N, np.full(2 * N, scale * w.w_delta)))
        return blocks, grad

    def tangent_cuts(self, problem: MpcProblem, z: np.ndarray, only_violated: bool = False):
        """Supporting lines of the displacement disc in the direction of each
        step's braking displacement. Returns ``(k, d)``: step indices and unit
        directions, one cut ``d . s_brk[k] <= s_max`` per row."""
        if not np.isfinite(problem.limits.s_max):
            return np.zeros(0, dtype=int), np.zeros((0, 2))
        s_brk = self._braking_displacement(problem, z)
        norm = np.linalg.norm(s_brk, axis=1)
        use = norm >= (problem.limits.s_max * (1 + CUT_TOL) if only_violated else 1e-3)
        k = np.flatnonzero(use)
        return k, s_brk[k] / norm[k, None]

    def constraints(self, problem: MpcProblem, z: np.ndarray, cuts=None):
        """Constraint matrix and bounds.

        The displacement-norm constraint enters as linear cuts; by default the
        tangent cuts at the braking displacement predicted by ``z``. Any cut is
        a valid outer bound of the disc, so cuts can be accumulated.
        """
        N = self.N
        L = problem.limits
        n_static = (N_BLOCKS - 1) * N
        k, d = self.tangent_cuts(problem, z) if cuts is None else cuts
        b = np.empty(n_static + len(k))
        for axis in range(2):
            xt, xr = problem.x0[axis, :3], problem.x0[axis, 3:]
            free = {"s": self.Phi[0] @ xt, "v": self.Phi[1] @ xt, "a": self.Phi[2] @ xt,
                    "th": self.Phi[0] @ xr, "thb": self.Phi_bt @ xr, "om": self.Phi[1] @ xr}
            lim = {"s": L.s_max, "v": L.v_max, "a": L.a_max, "th": L.theta_max,
                   "thb": L.theta_max, "om": L.omega_max}
            for key in free:
                b[self._rows_of(axis, key + "+")] = lim[key] - free[key]
                b[self._rows_of(axis, key + "-")] = lim[key] + free[key]
            b[self._rows_of(axis, "dl")] = 0.0

        rows = np.zeros((len(k), self.nz))
        rhs = np.full(len(k), L.s_max)
        for ax in range(2):
            rows[:, self._col(ax, "j")] = d[:, ax, None] * self.Gam_bs[k]
            rhs -= d[:, ax] * (self.Phi_bs[k] @ problem.x0[ax, :3])
        b[n_static:] = rhs
        A = sp.vstack([self._static, sp.csr_matrix(rows)], format="csr")
        return A, b

    def braking_rows(self, n_cuts: int) -> np.ndarray:
        idx = [np.arange(self._rows_of(ax, nm).start, self._rows_of(ax, nm).stop)
               for ax in range(2) for nm in _BRAKING_BLOCKS]
        n_static = (N_BLOCKS - 1) * self.N
        idx.append(np.arange(n_static, n_static + n_cuts))
        return np.concatenate(idx)

    def hard_rows(self, n_cuts: int) -> np.ndarray:
        soft = {"om+", "om-", "dl"}
        idx = [np.arange(self._rows_of(ax, nm).start, self._rows_of(ax, nm).stop)
               for ax in range(2) for nm in _AXIS_BLOCKS if nm not in soft]
        n_static = (N_BLOCKS - 1) * self.N
        idx.append(np.arange(n_static, n_static + n_cuts))
        return np.concatenate(idx)

    # ------------------------------------------------------------ warm start
    def _repair_slack(self, problem: MpcProblem, z: np.ndarray) -> np.ndarray:
        X = self.predict(problem, z)
        for axis in range(2):
            excess = np.abs(X[:, axis, 4]) - problem.limits.omega_max
            z[self._col(axis, "delta")] = np.maximum(excess, 0.0) if np.isfinite(problem.limits.omega_max) else 0.0
        return z

    def _initial_guess(self, problem: MpcProblem) -> tuple[np.ndarray, list[int]]:
        if not self.warm_start or self._z is None:
            return self._repair_slack(problem, np.zeros(self.nz)), []
        N = self.N
        z = self._z.reshape(6, N)
        shifted = np.zeros_like(z)
        shifted[:, :-1] = z[:, 1:]
        shifted = shifted.ravel()
        # tail input that holds the braking displacement/tilt of the last step
        X = self.predict(problem, shifted)
        A, B = integrator_matrices(self.dt)
        b = self.braking
        for axis in range(2):
            for var, col, coef in (("j", 0, (1.0, b.c_v * b.T_brk_s, 0.5 * b.c_u * b.T_brk_s ** 2)),
                                   ("jang", 3, (1.0, b.c_omega * b.T_brk_theta, 0.5 * b.c_u * b.T_brk_theta ** 2))):
                c = np.asarray(coef)
                prev = X[-2, axis, col:col + 3] if N > 1 else problem.x0[axis, col:col + 3]
                shifted[self._col(axis, var).stop - 1] = c @ (prev - A @ prev) / (c @ B)
        z = self._repair_slack(problem, shifted)
        n_static = (N_BLOCKS - 1) * N
        working = [r - 1 for r in self._working if r < n_static and r % N != 0]
        return z, working

    def _store(self, z: np.ndarray, working, cuts) -> None:
        """Keep the solution, its static working rows and the cuts that were active."""
        n_static = (N_BLOCKS - 1) * self.N
        k, d = cuts
        active = sorted(r - n_static for r in working if r >= n_static)
        self._z = z.copy()
        self._working = [r for r in working if r < n_static] + [n_static + i for i in range(len(active))]
        self._cuts = (k[active], d[active])

    def _initial_cuts(self, problem: MpcProblem, z: np.ndarray, working: list[int]):
        """Previously active cuts moved one step earlier, then tangents at ``z``.

        Returns the cut set and the working set extended by the carried cuts.
        """
        n_static = (N_BLOCKS - 1) * self.N
        k_old, d_old = self._cuts
        keep = k_old > 0 if self.warm_start else np.zeros(len(k_old), dtype=bool)
        k_old, d_old = k_old[keep] - 1, d_old[keep]
        working = list(working) + [n_static + i for i in range(len(k_old))]
        k_new, d_new = self.tangent_cuts(problem, z)
        return _merge_cuts((k_old, d_old), (k_new, d_new)), working

    # ------------------------------------------------------------------ solve
    def solve(self, problem: MpcProblem, z0: np.ndarray | None = None) -> MpcSolution:
        """Solve ``problem``; ``z0`` overrides the shifted warm start.

        Each iteration relinearizes the tilt output at ``z`` and solves the QP
        with the current set of displacement cuts; a cut is added for every
        step whose braking displacement leaves the disc. Iteration stops when
        the step is negligible and no cut is violated.
        """
        if problem.N != self.N or problem.dt != self.dt:
            raise ValueError("problem horizon/dt do not match the solver")
        if problem.limits != self.limits or problem.braking != self.braking:
            raise ValueError("problem limits/braking differ from the solver's")
        t_start = time.perf_counter()
        if z0 is None:
            z, working = self._initial_guess(problem)
        else:
            z, working = np.array(z0, dtype=float), []
        cuts, working = self._initial_cuts(problem, z, working)

        status = "max-iterations"
        relaxed = False           # elastic variable on the braking rows once the QP turns infeasible
        wide = False              # ... widened to every hard row
        e = 0.0
        history: list[float] = []
        qp_iters = 0
        step = float("nan")
        it = 0
        for it in range(1, self.max_iter + 1):
            blocks, grad = self.cost_terms(problem, z)
            A, b = self.constraints(problem, z, cuts)
            hess = BlockHessian(blocks)
            if not relaxed:
                res = solve_qp(hess, grad, A, b, x0=z, working=working)
                relaxed = res.status == "infeasible"
            if relaxed:
                res, wide = self._solve_relaxed(problem, hess, grad, A, b, z, e, len(cuts[0]), wide)
                e = float(res.x[-1])
                res.x = res.x[:-1]
            qp_iters += res.iterations
            p = res.x - z
            z = res.x
            working = [i for i in res.active if i < b.size]
            history.append(self.merit(problem, z))
            step = float(np.linalg.norm(p))
            n_cuts = len(cuts[0])
            cuts = _merge_cuts(cuts, self.tangent_cuts(problem, z, only_violated=True))
            if len(cuts[0]) == n_cuts and step <= self.step_tol * max(1.0, np.linalg.norm(z)):
                status = "optimal"
                break
        if relaxed:
            status = "infeasible-relaxed"
        self._store(z, working, cuts)

        N = self.N
        X = self.predict(problem, z)
        G, _ = self._tilt(problem, X[:, :, 3])
        outputs = np.stack([X[:, :, 2] + G, G, X[:, :, 2]], axis=-1)
        inputs = np.empty((N, 2, 2))
        slack = np.empty((N, 2))
        for axis in range(2):
            inputs[:, axis, 0] = z[self._col(axis, "j")]
            inputs[:, axis, 1] = z[self._col(axis, "jang")]
            slack[:, axis] = z[self._col(axis, "delta")]
        return MpcSolution(inputs=inputs, states=X, outputs=outputs, slack=slack, iterations=it,
                           objective=self.objective(problem, z),
                           status=status, emergency_slack=e, qp_iterations=qp_iters,
                           merit_history=history, step_norm=step,
                           solve_time=time.perf_counter() - t_start)

    def _solve_relaxed(self, problem, hess, grad, A, b, z, e, n_cuts, wide=False):
        """QP with one elastic variable on the braking rows, widened to all
        hard rows if that is still infeasible. Returns ``(result, wide)``."""
        scale = 2.0 / self.N * problem.weights.w_delta
        for wide in (True,) if wide else (False, True):
            rows = self.hard_rows(n_cuts) if wide else self.braking_rows(n_cuts)
            col = np.zeros(len(b))
            col[rows] = -1.0
            A2 = sp.vstack([sp.hstack([A, sp.csr_matrix(col[:, None])]),
                            sp.csr_matrix(np.r_[np.zeros(self.nz), -1.0][None, :])], format="csr")
            b2 = np.r_[b, 0.0]
            viol = A @ z - b
            start = np.r_[z, max(e, float(viol[rows].max()), 0.0)]
            res = solve_qp(hess.augmented([scale]), np.r_[grad, scale], A2, b2, x0=start)
            if res.status != "infeasible":
                res.active = [i for i in res.active if i < b.size]
                return res, wide
        raise RuntimeError("relaxed cueing problem is infeasible")


def _merge_cuts(old, new, tol: float = 1e-8):
    """Append cuts from ``new`` whose direction is not already present for that step."""
    k_old, d_old = old
    k_new, d_new = new
    if not len(k_new):
        return old
    keep = []
    for i in range(len(k_new)):
        same = k_old == k_new[i]
        if not np.any(d_old[same] @ d_new[i] > 1 - tol):
            keep.append(i)
    return np.r_[k_old, k_new[keep]].astype(int), np.vstack([d_old, d_new[keep]])
