"""Dense convex QP and LP solving by operator splitting (ADMM).

Solves

    minimize    0.5 x'Px + q'x
    subject to  l <= Ax <= u

for small dense problems.  The iteration is the standard two-block
splitting with over-relaxation; the linear system is solved in the
reduced (n x n) form, so the per-iteration cost is one small solve plus
two matrix-vector products.  On convergence the solution is polished by
re-solving the equality-constrained KKT system on the detected active
set, which brings the residuals down to machine precision on problems
of this size.

All operations are deterministic: fixed iteration order, no randomised
components, so identical inputs produce bitwise-identical iterates.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionError, SolverError

_RHO_MIN = 1e-6
_RHO_MAX = 1e6
_RHO_EQ_SCALE = 1e3
_INFEAS_TOL = 1e-6


class Status(enum.Enum):
    SOLVED = "solved"
    PRIMAL_INFEASIBLE = "primal_infeasible"
    DUAL_INFEASIBLE = "dual_infeasible"
    MAX_ITER = "max_iter"


@dataclass(frozen=True)
class QpSettings:
    eps_abs: float = 1e-6
    eps_rel: float = 1e-6
    max_iter: int = 20000
    sigma: float = 1e-6
    alpha: float = 1.6
    rho: float = 0.1
    check_interval: int = 25


DEFAULT_SETTINGS = QpSettings()


def _as_matrix(M, name):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if not np.all(np.isfinite(M)):
        raise SolverError(f"{name} contains NaN/Inf entries")
    return M


class QpProblem:
    """Immutable problem data.  P is symmetrised on construction."""

    def __init__(self, P, q, A=None, l=None, u=None):
        P = _as_matrix(P, "P")
        q = np.asarray(q, dtype=float).ravel()
        if not np.all(np.isfinite(q)):
            raise SolverError("q contains NaN/Inf entries")
        n = q.shape[0]
        if P.shape != (n, n):
            raise DimensionError(f"P shape {P.shape} incompatible with q of length {n}")
        if A is None:
            A = np.zeros((0, n))
            l = np.zeros(0)
            u = np.zeros(0)
        A = np.asarray(A, dtype=float)
        A = _as_matrix(A, "A") if A.size else A.reshape(0, n)
        if A.shape[1] != n:
            raise DimensionError(f"A has {A.shape[1]} columns, expected {n}")
        l = np.asarray(l, dtype=float).ravel()
        u = np.asarray(u, dtype=float).ravel()
        if l.shape[0] != A.shape[0] or u.shape[0] != A.shape[0]:
            raise DimensionError("bound vectors must have one entry per row of A")
        if np.any(np.isnan(l)) or np.any(np.isnan(u)):
            raise SolverError("bounds contain NaN entries")
        if np.any(l > u):
            raise ValueError("every row must satisfy l <= u")
        self.P = 0.5 * (P + P.T)
        self.q = q
        self.A = A
        self.l = l
        self.u = u

    @property
    def n(self):
        return self.q.shape[0]

    @property
    def m(self):
        return self.A.shape[0]

    def objective(self, x):
        return 0.5 * float(x @ self.P @ x) + float(self.q @ x)


@dataclass
class QpSolution:
    x: np.ndarray
    y: np.ndarray
    status: Status
    primal_residual: float
    dual_residual: float
    duality_gap: float
    iterations: int


def kkt_residuals(problem, x, y):
    """Primal/dual KKT residuals of a candidate point, in infinity norm.

    Pure function of the inputs; shares no state with the solver.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape[0] != problem.n or y.shape[0] != problem.m:
        raise DimensionError("candidate point does not match problem dimensions")
    if problem.m:
        Ax = problem.A @ x
        over = np.maximum(Ax - problem.u, 0.0)
        under = np.maximum(problem.l - Ax, 0.0)
        over[~np.isfinite(over)] = 0.0
        under[~np.isfinite(under)] = 0.0
        primal = float(np.max(over + under))
        dual_vec = problem.P @ x + problem.q + problem.A.T @ y
    else:
        primal = 0.0
        dual_vec = problem.P @ x + problem.q
    dual = float(np.max(np.abs(dual_vec))) if dual_vec.size else 0.0
    return {"primal": primal, "dual": dual}


def _masked_support(bounds, weights, active):
    """Sum of bounds*weights over active rows, 0 elsewhere (inf-safe)."""
    out = np.zeros_like(weights)
    out[active] = bounds[active] * weights[active]
    return out


def _duality_gap(problem, x, y):
    y_pos = np.maximum(y, 0.0)
    y_neg = np.maximum(-y, 0.0)
    u_term = _masked_support(problem.u, y_pos, y_pos > 0)
    l_term = _masked_support(problem.l, y_neg, y_neg > 0)
    if not (np.all(np.isfinite(u_term)) and np.all(np.isfinite(l_term))):
        return float("inf")
    gap = float(x @ problem.P @ x + problem.q @ x + np.sum(u_term) - np.sum(l_term))
    return abs(gap)


def _polish(problem, y, sigma):
    """Equality-KKT re-solve on the active set detected from dual signs."""
    n, m = problem.n, problem.m
    ytol = 1e-9 * max(1.0, float(np.max(np.abs(y))) if m else 0.0)
    low = y < -ytol
    up = y > ytol
    k = int(np.sum(low) + np.sum(up))
    K = np.zeros((n + k, n + k))
    K[:n, :n] = problem.P
    rhs = np.concatenate([-problem.q, np.zeros(k)])
    if k:
        A_act = np.vstack([problem.A[low], problem.A[up]])
        b_act = np.concatenate([problem.l[low], problem.u[up]])
        K[:n, n:] = A_act.T
        K[n:, :n] = A_act
        rhs[n:] = b_act
    reg = np.diag(np.concatenate([np.full(n, sigma), np.full(k, -sigma)]))
    try:
        sol = np.linalg.solve(K + reg, rhs)
        for _ in range(2):
            sol = sol + np.linalg.solve(K + reg, rhs - K @ sol)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(sol)):
        return None
    x_pol = sol[:n]
    y_pol = np.zeros(m)
    if k:
        nu = sol[n:]
        y_pol[np.flatnonzero(low)] = nu[: int(np.sum(low))]
        y_pol[np.flatnonzero(up)] = nu[int(np.sum(low)):]
    return x_pol, y_pol


def _primal_infeasibility_certificate(problem, dy):
    norm = float(np.max(np.abs(dy))) if dy.size else 0.0
    if norm <= 0:
        return False
    v = dy / norm
    if float(np.max(np.abs(problem.A.T @ v))) > _INFEAS_TOL:
        return False
    v_pos = np.maximum(v, 0.0)
    v_neg = np.minimum(v, 0.0)
    if np.any((v_pos > _INFEAS_TOL) & ~np.isfinite(problem.u)):
        return False
    if np.any((v_neg < -_INFEAS_TOL) & ~np.isfinite(problem.l)):
        return False
    fin_u = (v_pos > _INFEAS_TOL) & np.isfinite(problem.u)
    fin_l = (v_neg < -_INFEAS_TOL) & np.isfinite(problem.l)
    support = float(np.sum(_masked_support(problem.u, v_pos, fin_u))
                    + np.sum(_masked_support(problem.l, v_neg, fin_l)))
    return support <= -_INFEAS_TOL


def _dual_infeasibility_certificate(problem, dx):
    norm = float(np.max(np.abs(dx))) if dx.size else 0.0
    if norm <= 0:
        return False
    d = dx / norm
    if float(np.max(np.abs(problem.P @ d))) > _INFEAS_TOL:
        return False
    if float(problem.q @ d) > -_INFEAS_TOL:
        return False
    if problem.m:
        Ad = problem.A @ d
        fin_u = np.isfinite(problem.u)
        fin_l = np.isfinite(problem.l)
        if np.any(Ad[fin_u] > _INFEAS_TOL):
            return False
        if np.any(Ad[fin_l] < -_INFEAS_TOL):
            return False
    return True


def solve_qp(problem, settings=None):
    """Solve a QpProblem; returns a QpSolution.

    Raises SolverError when P is not positive semidefinite (detected by a
    failed Cholesky factorisation of the regularised curvature) or when
    inputs contain non-finite entries.  Infeasibility and unboundedness
    are reported through the solution status, not raised.
    """
    s = settings or DEFAULT_SETTINGS
    n, m = problem.n, problem.m

    try:
        np.linalg.cholesky(problem.P + s.sigma * np.eye(n))
    except np.linalg.LinAlgError:
        raise SolverError("cost matrix is not positive semidefinite")

    # Normalising the cost keeps the argmin unchanged and makes the
    # iteration behave identically across cost rescalings.
    c_scale = max(1.0, float(np.max(np.abs(problem.P))) if problem.P.size else 0.0,
                  float(np.max(np.abs(problem.q))) if problem.q.size else 0.0)
    P = problem.P / c_scale
    q = problem.q / c_scale
    A, l, u = problem.A, problem.l, problem.u

    equality = np.zeros(m, dtype=bool)
    if m:
        both = np.isfinite(l) & np.isfinite(u)
        equality[both] = (u[both] - l[both]) <= 1e-12
    rho = np.full(m, s.rho)
    rho[equality] = s.rho * _RHO_EQ_SCALE

    def factor(rho_vec):
        M = P + s.sigma * np.eye(n)
        if m:
            M = M + (A.T * rho_vec) @ A
        return M

    M = factor(rho)

    x = np.zeros(n)
    z = np.clip(np.zeros(m), l, u)
    y = np.zeros(m)
    x_chk = x.copy()
    y_chk = y.copy()

    def original_residuals(xv, yv):
        r = kkt_residuals(problem, xv, yv * c_scale)
        return r["primal"], r["dual"]

    def finish(status, xv, yv, iters):
        y_out = yv * c_scale
        r = kkt_residuals(problem, xv, y_out)
        return QpSolution(
            x=xv.copy(), y=y_out, status=status,
            primal_residual=r["primal"], dual_residual=r["dual"],
            duality_gap=_duality_gap(problem, xv, y_out), iterations=iters,
        )

    def try_polish(yv):
        pol = _polish(problem, yv * c_scale, s.sigma)
        if pol is None:
            return None
        xp, yp = pol
        rp = kkt_residuals(problem, xp, yp)
        if max(rp["primal"], rp["dual"]) <= s.eps_abs:
            return xp, yp / c_scale
        return None

    it = 0
    while it < s.max_iter:
        for _ in range(s.check_interval):
            rhs = s.sigma * x - q
            if m:
                rhs = rhs + A.T @ (rho * z - y)
            x_t = np.linalg.solve(M, rhs)
            if m:
                z_t = A @ x_t
                w = s.alpha * z_t + (1.0 - s.alpha) * z + y / rho
                x = s.alpha * x_t + (1.0 - s.alpha) * x
                z_new = np.clip(w, l, u)
                y = rho * (w - z_new)
                z = z_new
            else:
                x = s.alpha * x_t + (1.0 - s.alpha) * x
            it += 1

        Ax = A @ x if m else np.zeros(0)
        r_prim = float(np.max(np.abs(Ax - z))) if m else 0.0
        dual_vec = P @ x + q + (A.T @ y if m else 0.0)
        r_dual = float(np.max(np.abs(dual_vec)))
        s_prim = max(float(np.max(np.abs(Ax))) if m else 0.0,
                     float(np.max(np.abs(z))) if m else 0.0)
        s_dual = max(float(np.max(np.abs(P @ x))),
                     float(np.max(np.abs(A.T @ y))) if m else 0.0,
                     float(np.max(np.abs(q))) if q.size else 0.0)
        eps_p = s.eps_abs + s.eps_rel * s_prim
        eps_d = s.eps_abs + s.eps_rel * s_dual

        # The active set is often identified long before the raw iterates
        # meet tolerance, and a verified polish is cheap, so attempt one at
        # every check.
        pol = try_polish(y)
        if pol is not None:
            return finish(Status.SOLVED, pol[0], pol[1], it)
        if r_prim <= eps_p and r_dual <= eps_d:
            op, od = original_residuals(x, y)
            if op <= s.eps_abs and od <= s.eps_abs:
                return finish(Status.SOLVED, x, y, it)

        if m and _primal_infeasibility_certificate(
                QpProblem(P, q, A, l, u), y - y_chk):
            sol = finish(Status.PRIMAL_INFEASIBLE, x, y, it)
            sol.y = (y - y_chk) * c_scale
            return sol
        if _dual_infeasibility_certificate(QpProblem(P, q, A, l, u), x - x_chk):
            sol = finish(Status.DUAL_INFEASIBLE, x, y, it)
            sol.x = x - x_chk
            return sol
        x_chk = x.copy()
        y_chk = y.copy()

        if m and r_dual > 0 and r_prim > 0:
            ratio = np.sqrt((r_prim / max(s_prim, 1e-30))
                            / max(r_dual / max(s_dual, 1e-30), 1e-30))
            if ratio > 5.0 or ratio < 0.2:
                scale = float(np.clip(ratio, 1e-3, 1e3))
                rho = np.clip(rho * scale, _RHO_MIN, _RHO_MAX)
                M = factor(rho)

    pol = try_polish(y)
    if pol is not None:
        return finish(Status.SOLVED, pol[0], pol[1], it)
    op, od = original_residuals(x, y)
    if op <= s.eps_abs and od <= s.eps_abs:
        return finish(Status.SOLVED, x, y, it)
    return finish(Status.MAX_ITER, x, y, it)


@dataclass
class LpSolution:
    x: np.ndarray
    value: float
    status: Status
    y: np.ndarray = field(default=None, repr=False)


def solve_lp(c, A, l, u, settings=None):
    """Minimise c'x subject to l <= Ax <= u (a QP with zero curvature).

    Unbounded problems come back with DUAL_INFEASIBLE status; infeasible
    ones with PRIMAL_INFEASIBLE.
    """
    c = np.asarray(c, dtype=float).ravel()
    problem = QpProblem(np.zeros((c.shape[0], c.shape[0])), c, A, l, u)
    sol = solve_qp(problem, settings)
    value = float(c @ sol.x) if sol.status == Status.SOLVED else float("nan")
    return LpSolution(x=sol.x, value=value, status=sol.status, y=sol.y)
