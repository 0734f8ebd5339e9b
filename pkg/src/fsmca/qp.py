"""Dense convex QP solver (primal active-set, range-space).

Solves::

    minimize    0.5 x' H x + g' x
    subject to  A x <= b

with H positive definite. The Hessian is passed as a :class:`BlockHessian`
so block-diagonal structure (one block per controlled axis) is factorized
block by block. ``A`` may be dense or scipy-sparse.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.linalg import lapack


class BlockHessian:
    """Positive-definite block-diagonal matrix with cached Cholesky factors.

    ``blocks`` is a sequence of ``(start, matrix)`` pairs. A 1-D ``matrix``
    is taken as a diagonal block. The blocks must tile ``0..n`` in order.
    """

    def __init__(self, blocks):
        self._blocks = []
        pos = 0
        for start, mat in blocks:
            if start != pos:
                raise ValueError("Hessian blocks must be contiguous")
            mat = np.asarray(mat, dtype=float)
            size = mat.shape[0]
            if mat.ndim == 1:
                if np.any(mat <= 0):
                    raise np.linalg.LinAlgError("diagonal block not positive definite")
                fac = None
            else:
                fac = sla.cho_factor(mat, lower=True, check_finite=False)
            self._blocks.append((slice(start, start + size), mat, fac))
            pos += size
        self.n = pos

    @classmethod
    def dense(cls, H) -> "BlockHessian":
        return cls([(0, H)])

    def matvec(self, x: np.ndarray) -> np.ndarray:
        out = np.empty(self.n)
        for sl, mat, fac in self._blocks:
            out[sl] = mat * x[sl] if fac is None else mat @ x[sl]
        return out

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Apply H^-1 to a vector or to the columns of a matrix."""
        out = np.empty_like(rhs, dtype=float)
        for sl, mat, fac in self._blocks:
            if fac is None:
                out[sl] = rhs[sl] / (mat if rhs.ndim == 1 else mat[:, None])
            else:
                out[sl] = sla.cho_solve(fac, rhs[sl], check_finite=False)
        return out

    def toarray(self) -> np.ndarray:
        H = np.zeros((self.n, self.n))
        for sl, mat, fac in self._blocks:
            H[sl, sl] = np.diag(mat) if fac is None else mat
        return H

    def augmented(self, extra_diag) -> "BlockHessian":
        """Copy with extra diagonal entries appended (new trailing variables)."""
        new = object.__new__(BlockHessian)
        extra = np.atleast_1d(np.asarray(extra_diag, dtype=float))
        new._blocks = list(self._blocks) + [(slice(self.n, self.n + extra.size), extra, None)]
        new.n = self.n + extra.size
        return new


@dataclass
class QPResult:
    x: np.ndarray
    status: str                      # "optimal" | "max-iterations" | "infeasible"
    iterations: int
    active: list[int] = field(default_factory=list)
    multipliers: np.ndarray | None = None
    objective: float = float("nan")


FEAS_TOL = 1e-9


def _rows(A, idx) -> np.ndarray:
    idx = np.asarray(idx, dtype=int)
    if not sp.issparse(A):
        return np.asarray(A)[idx]
    A = A.tocsr() if A.format != "csr" else A
    out = np.zeros((idx.size, A.shape[1]))
    for k, i in enumerate(idx):
        lo, hi = A.indptr[i], A.indptr[i + 1]
        out[k, A.indices[lo:hi]] = A.data[lo:hi]
    return out


def _matvec(A, x):
    return A @ x


class _WorkingSet:
    """Active constraint rows with cached H^-1 a_i and Schur complement."""

    def __init__(self, hess: BlockHessian, A):
        self.hess = hess
        self.A = A
        self.idx: list[int] = []
        self.rows = np.zeros((0, hess.n))
        self.Y = np.zeros((hess.n, 0))
        self.M = np.zeros((0, 0))

    def add(self, i: int) -> None:
        self.add_many([i])

    def add_many(self, idx, rows=None, Y=None) -> None:
        if len(idx) == 0:
            return
        rows = _rows(self.A, idx) if rows is None else rows
        Y = self.hess.solve(rows.T) if Y is None else Y
        cross = self.rows @ Y
        m, k = len(self.idx), len(idx)
        M = np.empty((m + k, m + k))
        M[:m, :m] = self.M
        M[:m, m:] = cross
        M[m:, :m] = cross.T
        M[m:, m:] = rows @ Y
        self.M = M
        self.rows = np.vstack([self.rows, rows])
        self.Y = np.hstack([self.Y, Y])
        self.idx.extend(int(i) for i in idx)

    def remove(self, pos: int) -> None:
        keep = np.ones(len(self.idx), dtype=bool)
        keep[pos] = False
        self.M = self.M[np.ix_(keep, keep)]
        self.rows = self.rows[keep]
        self.Y = self.Y[:, keep]
        del self.idx[pos]

    def solve_schur(self, rhs: np.ndarray) -> np.ndarray:
        try:
            fac = sla.cho_factor(self.M, lower=True, check_finite=False)
            return sla.cho_solve(fac, rhs, check_finite=False)
        except np.linalg.LinAlgError:
            return np.linalg.lstsq(self.M, rhs, rcond=None)[0]

    def seed(self, candidates, tol: float = 1e-10) -> None:
        """Add a linearly independent subset of ``candidates`` (pivoted Cholesky)."""
        if not candidates:
            return
        cand = np.asarray(candidates, dtype=int)
        rows = _rows(self.A, cand)
        Y = self.hess.solve(rows.T)
        M = rows @ Y
        scale = 1.0 / np.sqrt(np.maximum(np.diag(M), 1e-300))
        Mn = M * scale[:, None] * scale[None, :]
        _, piv, rank, info = lapack.dpstrf(Mn, lower=1, tol=tol)
        keep = np.sort(piv[:rank] - 1)
        self.add_many(cand[keep], rows[keep], Y[:, keep])


def active_set(hess: BlockHessian, g, A, b, x0, working=None, max_iter: int = 5000,
               tol: float = 1e-10) -> QPResult:
    """Primal active-set iterations from a feasible ``x0``.

    ``working`` is an optional guess of the active rows; rows that are not
    tight at ``x0`` or are linearly dependent are discarded.
    """
    x = np.array(x0, dtype=float)
    g = np.asarray(g, dtype=float)
    b = np.asarray(b, dtype=float)
    m_rows = b.size
    resid = b - _matvec(A, x)
    if np.any(resid < -1e3 * FEAS_TOL * (1.0 + np.abs(b))):
        raise ValueError("active_set requires a feasible starting point")

    ws = _WorkingSet(hess, A)
    if working:
        tight = [i for i in dict.fromkeys(working) if 0 <= i < m_rows and resid[i] <= 1e-8]
        ws.seed(tight)
    in_ws = np.zeros(m_rows, dtype=bool)
    in_ws[ws.idx] = True

    if sp.issparse(A):
        row_norm = np.sqrt(np.asarray(A.multiply(A).sum(axis=1)).ravel())
    else:
        row_norm = np.linalg.norm(A, axis=1)
    n = x.size
    status = "max-iterations"
    lam = np.zeros(0)
    degenerate = False
    at_min = False
    dropped = -1
    it = 0
    for it in range(1, max_iter + 1):
        q = hess.matvec(x) + g
        Hq = hess.solve(q)
        if ws.idx:
            lam = ws.solve_schur(-(ws.rows @ Hq))
            p = -(Hq + ws.Y @ lam)
        else:
            lam = np.zeros(0)
            p = -Hq
        pnorm = np.linalg.norm(p)
        # after an unblocked step x already minimizes on the working set
        if at_min or len(ws.idx) >= n or pnorm <= tol * max(1.0, np.linalg.norm(x), np.linalg.norm(Hq)):
            at_min = False
            if lam.size == 0 or lam.min() >= -tol * (1.0 + np.abs(lam).max()):
                status = "optimal"
                break
            neg = np.flatnonzero(lam < -tol * (1.0 + np.abs(lam).max()))
            # Bland-style choice after degenerate steps to avoid cycling
            pos = int(neg[np.argmin(np.asarray(ws.idx)[neg])]) if degenerate else int(np.argmin(lam))
            dropped = ws.idx[pos]
            in_ws[dropped] = False
            ws.remove(pos)
            continue
        Ap = _matvec(A, p)
        cand = (Ap > 1e-11 * row_norm * pnorm) & ~in_ws
        # a row just released with a negative multiplier cannot block in exact arithmetic
        if dropped >= 0:
            cand[dropped] = False
            dropped = -1
        alpha, block = 1.0, -1
        if np.any(cand):
            ci = np.flatnonzero(cand)
            ratios = np.maximum(resid[ci], 0.0) / Ap[ci]
            k = int(np.argmin(ratios))
            if ratios[k] < 1.0:
                alpha, block = float(ratios[k]), int(ci[k])
        degenerate = alpha == 0.0
        at_min = block < 0
        x = x + alpha * p
        resid = resid - alpha * Ap
        if block >= 0:
            resid[block] = 0.0
            ws.add(block)
            in_ws[block] = True

    mult = np.zeros(m_rows)
    if lam.size == len(ws.idx) and ws.idx:
        mult[ws.idx] = lam
    obj = 0.5 * x @ hess.matvec(x) + g @ x
    return QPResult(x=x, status=status, iterations=it, active=list(ws.idx),
                    multipliers=mult, objective=float(obj))


def _stack_col(A, col):
    """Append a dense column to A (dense or sparse)."""
    col = np.asarray(col, dtype=float)[:, None]
    if sp.issparse(A):
        return sp.hstack([A, sp.csr_matrix(col)], format="csr")
    return np.hstack([A, col])


def _stack_row(A, row):
    row = np.asarray(row, dtype=float)[None, :]
    if sp.issparse(A):
        return sp.vstack([A, sp.csr_matrix(row)], format="csr")
    return np.vstack([A, row])


def find_feasible(A, b, x0, elastic_rows=None, reg: float = 1e-6, tol: float = 1e-9,
                  max_iter: int = 5000, working=None) -> tuple[np.ndarray, float, list[int]]:
    """Phase 1: move ``x0`` onto ``{A x <= b}``.

    Solves ``min t + reg/2 |x - x0|^2`` with one elastic variable ``t >= 0``
    shared by ``elastic_rows`` (default: all rows); the remaining rows must
    already hold at ``x0``, and those of them listed in ``working`` seed the
    active set. Returns ``(x, t, working_rows)``; ``t > tol`` means the
    constraint set is (numerically) empty.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    b = np.asarray(b, dtype=float)
    viol = _matvec(A, x0) - b
    rows = np.arange(b.size) if elastic_rows is None else np.asarray(elastic_rows)
    t0 = max(float(viol[rows].max()) if rows.size else 0.0, 0.0)
    other = np.setdiff1d(np.arange(b.size), rows)
    if other.size and viol[other].max() > tol:
        raise ValueError("rows outside the elastic set are violated at x0")
    if t0 <= tol:
        return x0.copy(), 0.0, []
    col = np.zeros(b.size)
    col[rows] = -1.0
    A1 = _stack_row(_stack_col(A, col), np.r_[np.zeros(n), -1.0])
    b1 = np.r_[b, 0.0]
    hess = BlockHessian([(0, np.full(n, reg)), (n, np.array([reg]))])
    g1 = np.r_[-reg * x0, 1.0]
    start = np.r_[x0, t0 * (1.0 + 1e-12) + 1e-15]
    hard = np.zeros(b.size, dtype=bool)
    hard[other] = True
    seed = [i for i in (working or []) if 0 <= i < b.size and hard[i]]
    res = active_set(hess, g1, A1, b1, start, working=seed, max_iter=max_iter, tol=1e-13)
    x, t = res.x[:n], float(res.x[n])
    working = [i for i in res.active if i < b.size]
    return x, max(t, 0.0), working


def dual_active_set(hess: BlockHessian, g, A, b, working=None, max_iter: int = 5000,
                    tol: float = 1e-9) -> QPResult:
    """Dual active-set iterations (Goldfarb-Idnani) from the minimizer on ``working``.

    No feasible start is needed. Starting from the working set of a nearby
    problem, usually only a few violated rows remain to be added.
    """
    g = np.asarray(g, dtype=float)
    b = np.asarray(b, dtype=float)
    m_rows = b.size
    ws = _WorkingSet(hess, A)
    if working:
        ws.seed([i for i in dict.fromkeys(working) if 0 <= i < m_rows])
    if sp.issparse(A):
        row_norm = np.sqrt(np.asarray(A.multiply(A).sum(axis=1)).ravel())
    else:
        row_norm = np.linalg.norm(A, axis=1)
    row_norm = np.maximum(row_norm, 1e-300)
    Hg = hess.solve(g)

    def eq_min():
        if not ws.idx:
            return -Hg, np.zeros(0)
        lam = ws.solve_schur(-(b[ws.idx] + ws.rows @ Hg))
        return -(Hg + ws.Y @ lam), lam

    def drop_negative(x, lam):
        while lam.size and lam.min() < -tol * (1.0 + np.abs(lam).max()):
            ws.remove(int(np.argmin(lam)))
            x, lam = eq_min()
        return x, lam

    x, lam = drop_negative(*eq_min())
    status = "max-iterations"
    it = 0
    while it < max_iter:
        it += 1
        viol = (_matvec(A, x) - b) / row_norm
        if ws.idx:
            viol[ws.idx] = -np.inf
        j = int(np.argmax(viol)) if m_rows else -1
        if j < 0 or viol[j] <= tol * (1.0 + abs(b[j]) / row_norm[j]):
            status = "optimal"
            break
        a = _rows(A, [j])[0]
        Ha = hess.solve(a)
        aHa = float(a @ Ha)
        mu = 0.0
        while True:
            if ws.idx:
                r = ws.solve_schur(ws.rows @ Ha)
                zdir = Ha - ws.Y @ r
            else:
                r, zdir = np.zeros(0), Ha
            az = float(a @ zdir)
            t1 = (float(a @ x) - b[j]) / az if az > 1e-12 * aHa else np.inf
            pos = np.flatnonzero(r > 1e-12 * (1.0 + np.abs(r).max())) if r.size else np.zeros(0, int)
            if pos.size:
                ratios = np.maximum(lam[pos], 0.0) / r[pos]
                k = int(pos[np.argmin(ratios)])
                t2 = float(ratios.min())
            else:
                k, t2 = -1, np.inf
            if not np.isfinite(t1) and not np.isfinite(t2):
                return QPResult(x=x, status="infeasible", iterations=it, active=list(ws.idx))
            t = min(t1, t2)
            x = x - t * zdir
            lam = lam - t * r
            mu += t
            if t1 <= t2:
                ws.add(j)
                lam = np.r_[lam, mu]
                break
            # a working row reaches a zero multiplier before row j is satisfied
            ws.remove(k)
            lam = np.delete(lam, k)
            it += 1
            if it >= max_iter:
                break
        # refresh from the factorization to keep round-off from accumulating
        x, lam = drop_negative(*eq_min())

    mult = np.zeros(m_rows)
    if ws.idx and lam.size == len(ws.idx):
        mult[ws.idx] = np.maximum(lam, 0.0)
    obj = 0.5 * x @ hess.matvec(x) + g @ x
    return QPResult(x=x, status=status, iterations=it, active=list(ws.idx),
                    multipliers=mult, objective=float(obj))


def solve_qp(hess: BlockHessian, g, A, b, x0=None, working=None, max_iter: int = 5000,
             method: str = "dual") -> QPResult:
    """Solve the QP.

    ``method="dual"`` ignores ``x0`` and warm-starts from ``working`` only;
    ``method="primal"`` starts at ``x0``, running phase 1 first when it is
    infeasible.
    """
    if method == "dual":
        return dual_active_set(hess, g, A, b, working=working, max_iter=max_iter)
    if method != "primal":
        raise ValueError(f"unknown QP method {method!r}")
    n = hess.n
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    b = np.asarray(b, dtype=float)
    viol = _matvec(A, x0) - b
    if viol.size and viol.max() > FEAS_TOL:
        # only the violated rows get the elastic variable; the rest keep x0's active set
        x0, t, w1 = find_feasible(A, b, x0, elastic_rows=np.flatnonzero(viol > 0), working=working)
        if t > 1e-7:
            return QPResult(x=x0, status="infeasible", iterations=0)
        working = list(working or []) + w1
        # clean up the phase-1 tolerance so the start is strictly feasible
        viol = _matvec(A, x0) - b
        if viol.max() > 0:
            x0 = _nudge_feasible(A, b, x0)
    return active_set(hess, g, A, b, x0, working=working, max_iter=max_iter)


def _nudge_feasible(A, b, x, iters: int = 20):
    """Remove round-off violations left by phase 1 (minimum-norm corrections)."""
    for _ in range(iters):
        viol = _matvec(A, x) - b
        bad = np.flatnonzero(viol > 0)
        if bad.size == 0:
            break
        rows = _rows(A, bad)
        x = x - np.linalg.lstsq(rows, viol[bad] * (1 + 1e-9) + 1e-15, rcond=None)[0]
    return x
