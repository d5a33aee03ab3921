"""Convex solve contract shared by the band fit (QP) and the scheduler (LP)."""
import logging
from typing import List, Optional, Sequence, Tuple

import cvxpy as cp
import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from errors import NonConvexError, SolverError
from models import ConvexProgram, SolveResult

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-9
# Clarabel retries after a breakdown or an inaccurate finish
QP_RETRY_TOLERANCES = (1e-7, 1e-5)
PSD_TOLERANCE = 1e-9
MAX_ITER = 500

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
MAX_ITER_STATUS = "max_iter"
INACCURATE = "inaccurate"
FAILED = "failed"

_HIGHS_STATUS = {0: OPTIMAL, 1: MAX_ITER_STATUS, 2: INFEASIBLE, 3: UNBOUNDED}
_CVXPY_STATUS = {
    cp.OPTIMAL: OPTIMAL,
    cp.OPTIMAL_INACCURATE: INACCURATE,
    cp.INFEASIBLE: INFEASIBLE,
    cp.INFEASIBLE_INACCURATE: INFEASIBLE,
    cp.UNBOUNDED: UNBOUNDED,
    cp.UNBOUNDED_INACCURATE: UNBOUNDED,
    cp.USER_LIMIT: MAX_ITER_STATUS,
}


def _rows(A) -> int:
    return 0 if A is None else A.shape[0]


def _dense(A) -> np.ndarray:
    return A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)


def validate_program(prog: ConvexProgram) -> None:
    """
    Checks dimensions and convexity of a program.

    Raises:
        SolverError: On inconsistent dimensions
        NonConvexError: If P is not symmetric positive semidefinite
    """
    n = prog.n
    for name, A, b in (("A_ub", prog.A_ub, prog.b_ub), ("A_eq", prog.A_eq, prog.b_eq)):
        if (A is None) != (b is None):
            raise SolverError(f"{name} and its right-hand side must be given together")
        if A is not None:
            if A.shape[1] != n:
                raise SolverError(f"{name} has {A.shape[1]} columns, expected {n}")
            if np.asarray(b).shape != (A.shape[0],):
                raise SolverError(f"{name} right-hand side has shape {np.asarray(b).shape}")
    for name, bound in (("lb", prog.lb), ("ub", prog.ub)):
        if bound is not None and np.asarray(bound).shape != (n,):
            raise SolverError(f"{name} must have length {n}")
    if np.any(prog.lower() > prog.upper()):
        raise SolverError("lower bound exceeds upper bound")
    if prog.P is None:
        return
    if prog.P.shape != (n, n):
        raise SolverError(f"P has shape {prog.P.shape}, expected ({n}, {n})")
    P = _dense(prog.P)
    if not np.allclose(P, P.T, atol=1e-12):
        raise NonConvexError("quadratic cost matrix is not symmetric")
    eig = np.linalg.eigvalsh(P)
    scale = max(1.0, float(np.max(np.abs(eig))))
    if eig[0] < -PSD_TOLERANCE * scale:
        raise NonConvexError(f"quadratic cost matrix has negative eigenvalue {eig[0]:.3e}")


def kkt_residuals(
    prog: ConvexProgram,
    x: np.ndarray,
    z_ub: Optional[np.ndarray] = None,
    mu_lb: Optional[np.ndarray] = None,
    mu_ub: Optional[np.ndarray] = None,
    y_eq: Optional[np.ndarray] = None,
) -> dict:
    """
    Primal feasibility, stationarity and complementarity residuals at ``x``.

    Inequality multipliers must be non-negative. When ``y_eq`` is omitted the
    equality multipliers are taken as the least-squares fit of stationarity.
    """
    n = prog.n
    lower, upper = prog.lower(), prog.upper()
    primal = float(np.max(np.maximum(lower - x, 0.0), initial=0.0))
    primal = max(primal, float(np.max(np.maximum(x - upper, 0.0), initial=0.0)))
    slack_ub = None
    if prog.A_ub is not None:
        slack_ub = np.asarray(prog.b_ub) - prog.A_ub @ x
        primal = max(primal, float(np.max(np.maximum(-slack_ub, 0.0), initial=0.0)))
    if prog.A_eq is not None:
        primal = max(primal, float(np.max(np.abs(prog.A_eq @ x - prog.b_eq), initial=0.0)))

    grad = np.asarray(prog.q, dtype=float).copy()
    if prog.P is not None:
        grad = grad + prog.P @ x
    z_ub = np.zeros(_rows(prog.A_ub)) if z_ub is None else z_ub
    mu_lb = np.zeros(n) if mu_lb is None else mu_lb
    mu_ub = np.zeros(n) if mu_ub is None else mu_ub
    if prog.A_ub is not None:
        grad = grad + prog.A_ub.T @ z_ub
    grad = grad - mu_lb + mu_ub
    if prog.A_eq is not None:
        if y_eq is None:
            y_eq = np.linalg.lstsq(_dense(prog.A_eq).T, -grad, rcond=None)[0]
        grad = grad + prog.A_eq.T @ y_eq

    complementarity = 0.0
    if slack_ub is not None and slack_ub.size:
        complementarity = float(np.max(np.abs(z_ub * slack_ub)))
    finite_lb = np.isfinite(lower)
    finite_ub = np.isfinite(upper)
    if finite_lb.any():
        complementarity = max(complementarity, float(np.max(np.abs(mu_lb[finite_lb] * (x - lower)[finite_lb]))))
    if finite_ub.any():
        complementarity = max(complementarity, float(np.max(np.abs(mu_ub[finite_ub] * (upper - x)[finite_ub]))))
    dual = float(
        max(
            np.max(np.maximum(-z_ub, 0.0), initial=0.0),
            np.max(np.maximum(-mu_lb, 0.0), initial=0.0),
            np.max(np.maximum(-mu_ub, 0.0), initial=0.0),
        )
    )
    return {
        "primal": primal,
        "dual": dual,
        "stationarity": float(np.max(np.abs(grad), initial=0.0)),
        "complementarity": complementarity,
    }


def objective_value(prog: ConvexProgram, x: np.ndarray) -> float:
    value = float(np.dot(prog.q, x))
    if prog.P is not None:
        value += 0.5 * float(x @ (prog.P @ x))
    return value


def _solve_lp(prog: ConvexProgram, tolerance: float) -> SolveResult:
    bounds = [
        (None if not np.isfinite(lo) else lo, None if not np.isfinite(hi) else hi)
        for lo, hi in zip(prog.lower(), prog.upper())
    ]
    res = linprog(
        c=prog.q,
        A_ub=prog.A_ub,
        b_ub=prog.b_ub,
        A_eq=prog.A_eq,
        b_eq=prog.b_eq,
        bounds=bounds,
        method="highs",
        options={
            "primal_feasibility_tolerance": max(tolerance, 1e-10),
            "dual_feasibility_tolerance": max(tolerance, 1e-10),
            "presolve": True,
        },
    )
    status = _HIGHS_STATUS.get(res.status)
    if status is None:
        raise SolverError(f"LP solver failed: {res.message}")
    if status != OPTIMAL:
        logger.debug("LP finished with status %s: %s", status, res.message)
        return SolveResult(status=status)

    x = np.asarray(res.x, dtype=float)
    z_ub = -np.asarray(res.ineqlin.marginals) if prog.A_ub is not None else None
    y_eq = -np.asarray(res.eqlin.marginals) if prog.A_eq is not None else None
    residuals = kkt_residuals(
        prog,
        x,
        z_ub=z_ub,
        mu_lb=np.asarray(res.lower.marginals),
        mu_ub=-np.asarray(res.upper.marginals),
        y_eq=y_eq,
    )
    return SolveResult(status=OPTIMAL, x=x, objective=float(res.fun), residuals=residuals)


class _QpModel:
    """cvxpy problem compiled once; the cost weights are parameters."""

    def __init__(self, prog: ConvexProgram):
        self.prog = prog
        n = prog.n
        self.x = cp.Variable(n)
        self.w_quad = cp.Parameter(nonneg=True, value=1.0)
        self.w_lin = cp.Parameter(nonneg=True, value=1.0)
        P = sp.csc_matrix(prog.P) if prog.P is not None else None
        quad = 0.5 * cp.quad_form(self.x, cp.psd_wrap(P)) if P is not None else 0.0
        objective = self.w_quad * quad + self.w_lin * (np.asarray(prog.q) @ self.x)

        self.ub_con = self.eq_con = self.lb_bound = self.ub_bound = None
        constraints = []
        if prog.A_ub is not None:
            self.ub_con = prog.A_ub @ self.x <= prog.b_ub
            constraints.append(self.ub_con)
        if prog.A_eq is not None:
            self.eq_con = prog.A_eq @ self.x == prog.b_eq
            constraints.append(self.eq_con)
        self.lb_idx = np.flatnonzero(np.isfinite(prog.lower()))
        self.ub_idx = np.flatnonzero(np.isfinite(prog.upper()))
        if self.lb_idx.size:
            self.lb_bound = self.x[self.lb_idx] >= prog.lower()[self.lb_idx]
            constraints.append(self.lb_bound)
        if self.ub_idx.size:
            self.ub_bound = self.x[self.ub_idx] <= prog.upper()[self.ub_idx]
            constraints.append(self.ub_bound)
        self.problem = cp.Problem(cp.Minimize(objective), constraints)

    def weighted_program(self, w_quad: float, w_lin: float) -> ConvexProgram:
        prog = self.prog
        return prog.model_copy(
            update={
                "P": None if prog.P is None else w_quad * sp.csc_matrix(prog.P),
                "q": w_lin * np.asarray(prog.q, dtype=float),
            }
        )

    def _attempt(self, tolerance: float) -> str:
        try:
            self.problem.solve(
                solver=cp.CLARABEL,
                tol_gap_abs=tolerance,
                tol_gap_rel=tolerance,
                tol_feas=tolerance,
                max_iter=MAX_ITER,
            )
        except cp.error.SolverError as e:
            logger.debug("Clarabel broke down at tolerance %.0e: %s", tolerance, str(e))
            return FAILED
        return _CVXPY_STATUS.get(self.problem.status, MAX_ITER_STATUS)

    def solve(self, w_quad: float, w_lin: float, tolerance: float) -> SolveResult:
        """
        Solves with the given cost weights.

        The weights are rescaled so the larger one is 1; the minimizer is
        unchanged and the objective and multipliers are scaled back. A
        breakdown, iteration limit or inaccurate finish is retried with looser
        tolerances, and a point that still fails comes back non-optimal.
        """
        scale = max(w_quad, w_lin)
        if scale <= 0.0:
            raise SolverError("at least one cost weight must be positive")
        self.w_quad.value = w_quad / scale
        self.w_lin.value = w_lin / scale

        status = FAILED
        for tol in (tolerance, *[t for t in QP_RETRY_TOLERANCES if t > tolerance]):
            status = self._attempt(tol)
            if status in (OPTIMAL, INFEASIBLE, UNBOUNDED):
                break
            logger.debug("QP status %s at tolerance %.0e (weights %.4g, %.4g)", status, tol, w_quad, w_lin)
        if status != OPTIMAL:
            if status not in (INFEASIBLE, UNBOUNDED):
                logger.warning("QP not solved (weights %.4g, %.4g): %s", w_quad, w_lin, status)
            return SolveResult(status=status)

        n = self.prog.n
        x = np.asarray(self.x.value, dtype=float)
        mu_lb = np.zeros(n)
        mu_ub = np.zeros(n)
        if self.lb_bound is not None:
            mu_lb[self.lb_idx] = scale * np.asarray(self.lb_bound.dual_value)
        if self.ub_bound is not None:
            mu_ub[self.ub_idx] = scale * np.asarray(self.ub_bound.dual_value)
        z_ub = scale * np.asarray(self.ub_con.dual_value) if self.ub_con is not None else None
        weighted = self.weighted_program(w_quad, w_lin)
        residuals = kkt_residuals(weighted, x, z_ub=z_ub, mu_lb=mu_lb, mu_ub=mu_ub)
        return SolveResult(
            status=OPTIMAL, x=x, objective=objective_value(weighted, x), residuals=residuals
        )


def solve(prog: ConvexProgram, tolerance: float = DEFAULT_TOLERANCE) -> SolveResult:
    """
    Solves a convex QP or LP.

    Linear programs go to HiGHS, quadratic ones to Clarabel through cvxpy.

    Args:
        prog: Program in standard form
        tolerance: Feasibility and optimality tolerance

    Returns:
        SolveResult with status, primal point, objective and KKT residuals;
        a QP that Clarabel cannot finish has status ``failed`` or ``inaccurate``

    Raises:
        SolverError: On malformed programs or an LP solver breakdown
        NonConvexError: If the quadratic cost is not PSD
    """
    validate_program(prog)
    if prog.is_linear:
        return _solve_lp(prog, tolerance)
    return _QpModel(prog).solve(1.0, 1.0, tolerance)


def solve_weighted(
    prog: ConvexProgram,
    weights: Sequence[Tuple[float, float]],
    tolerance: float = DEFAULT_TOLERANCE,
) -> List[SolveResult]:
    """
    Solves ``min w_quad * 1/2 x'Px + w_lin * q'x`` for every weight pair.

    The problem is compiled once and re-solved with new parameter values.
    A weight pair that does not solve yields a non-optimal result instead of
    aborting the remaining pairs.
    """
    validate_program(prog)
    model = _QpModel(prog)
    return [model.solve(w_quad, w_lin, tolerance) for w_quad, w_lin in weights]


def require_optimal(result: SolveResult, context: str) -> SolveResult:
    if not result.optimal:
        raise SolverError(f"{context}: solver returned status '{result.status}'")
    return result
