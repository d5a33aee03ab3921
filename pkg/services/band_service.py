"""
Bounded least squares estimation of affine indoor-temperature bands.

For a cluster at period t each training day k contributes a row
``X_k = [p_1..p_t, phi_0, phi_out_t, 1]`` and a target ``phi_in_t``. The fit
minimizes ``beta * sum_k (J_U + J_L)^2 + (1 - beta) * J_A`` where the J's are
hinge errors outside the band and J_A is the summed band width.
"""
import logging
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.optimize import lsq_linear

from errors import DataValidationError, EmptyDatasetError, SolverError
from models import (
    BandParameters,
    BlseFitReport,
    BlseSweepRecord,
    ConvexProgram,
    ThermalMode,
    TrainingDataset,
)
from services import solver_service

logger = logging.getLogger(__name__)

CONTEXT_SIZE = 3
# keeps the beta = 1 optimum unique (narrowest zero-error band)
AREA_REGULARIZER = 1e-9
# keeps the beta = 0 optimum unique (collapsed least-squares band)
ERROR_FLOOR = 1e-6
RIDGE = 1e-10
TIE_TOLERANCE = 1e-9


class ClusterData(NamedTuple):
    t: int
    X: np.ndarray  # (K, t + 3)
    y: np.ndarray  # (K,)

    @property
    def size(self) -> int:
        return int(self.y.shape[0])


def cluster_data(ds: TrainingDataset, day_ids: Optional[Sequence[int]], t: int) -> ClusterData:
    """Band regression rows of the given days (all days if ``day_ids`` is None)."""
    if not 1 <= t <= ds.periods:
        raise DataValidationError(f"period {t} outside 1..{ds.periods}")
    arrays = ds.arrays()
    if day_ids is None:
        mask = np.ones(ds.size, dtype=bool)
    else:
        mask = np.isin(arrays.day_ids, np.asarray(list(day_ids), dtype=int))
    K = int(mask.sum())
    X = np.hstack(
        [
            arrays.loads[mask, :t],
            arrays.initial[mask, None],
            arrays.outdoor[mask, t - 1][:, None],
            np.ones((K, 1)),
        ]
    )
    return ClusterData(t=t, X=X, y=arrays.indoor[mask, t - 1].copy())


def _require(data: ClusterData, what: str) -> None:
    if data.size == 0:
        raise EmptyDatasetError(f"{what}: no data points")


def _check_beta(beta: float) -> None:
    if not 0.0 <= beta <= 1.0:
        raise DataValidationError(f"beta must lie in [0, 1], got {beta}")


def beta_grid(M: int) -> np.ndarray:
    if M < 2:
        raise DataValidationError("the beta grid needs at least 2 points")
    return np.array([(i - 1) / (M - 1) for i in range(1, M + 1)])


def blse_weights(beta: float) -> Tuple[float, float]:
    return beta + ERROR_FLOOR, (1.0 - beta) + AREA_REGULARIZER


def build_blse_program(data: ClusterData, mode: ThermalMode = ThermalMode.COOLING) -> ConvexProgram:
    """
    Standard-form QP over ``z = [u, l, J_U, J_L]``.

    ``u``/``l`` stack the load and context coefficients of the upper/lower
    band. The quadratic term is the squared hinge error; the linear term is
    the band area. Cost weights are applied by the caller.
    """
    t, K = data.t, data.size
    d = t + CONTEXT_SIZE
    n = 2 * d + 2 * K
    X = sp.csr_matrix(data.X)
    I = sp.identity(K, format="csr")
    Z_d = sp.csr_matrix((K, d))
    Z_K = sp.csr_matrix((K, K))

    E = sp.hstack([sp.csr_matrix((K, 2 * d)), I, I], format="csr")
    ridge = sp.diags(np.r_[np.full(2 * d, RIDGE), np.zeros(2 * K)])
    P = (2.0 * (E.T @ E) + 2.0 * ridge).tocsc()

    column_sum = np.asarray(data.X.sum(axis=0)).ravel()
    q = np.r_[column_sum, -column_sum, np.zeros(2 * K)]

    A_ub = sp.vstack(
        [
            sp.hstack([-X, Z_d, -I, Z_K]),  # J_U >= y - X u
            sp.hstack([Z_d, X, Z_K, -I]),  # J_L >= X l - y
            sp.hstack([-X, X, Z_K, Z_K]),  # X u >= X l
        ],
        format="csr",
    )
    b_ub = np.r_[-data.y, data.y, np.zeros(K)]

    lb = np.full(n, -np.inf)
    ub = np.full(n, np.inf)
    load_idx = np.r_[np.arange(t), d + np.arange(t)]
    if mode is ThermalMode.COOLING:
        ub[load_idx] = 0.0
    else:
        lb[load_idx] = 0.0
    lb[2 * d :] = 0.0
    return ConvexProgram(q=q, P=P, A_ub=A_ub, b_ub=b_ub, lb=lb, ub=ub)


def _band_from_solution(x: np.ndarray, t: int, mode: ThermalMode, beta: float) -> BandParameters:
    d = t + CONTEXT_SIZE
    u, l = np.array(x[:d], dtype=float), np.array(x[d : 2 * d], dtype=float)
    # solver noise must not break the sign constraints
    if mode is ThermalMode.COOLING:
        u[:t] = np.minimum(u[:t], 0.0)
        l[:t] = np.minimum(l[:t], 0.0)
    else:
        u[:t] = np.maximum(u[:t], 0.0)
        l[:t] = np.maximum(l[:t], 0.0)
    return BandParameters(
        t=t,
        upper_load_coef=tuple(u[:t].tolist()),
        lower_load_coef=tuple(l[:t].tolist()),
        upper_context_coef=tuple(u[t:].tolist()),
        lower_context_coef=tuple(l[t:].tolist()),
        mode=mode,
        beta=float(beta),
    )


def band_values(bp: BandParameters, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(theta_L, theta_U) for every row of a design matrix."""
    upper = np.r_[bp.upper_load_coef, bp.upper_context_coef]
    lower = np.r_[bp.lower_load_coef, bp.lower_context_coef]
    return X @ lower, X @ upper


def hinge_errors(bp: BandParameters, data: ClusterData) -> Tuple[np.ndarray, np.ndarray]:
    theta_l, theta_u = band_values(bp, data.X)
    return np.maximum(data.y - theta_u, 0.0), np.maximum(theta_l - data.y, 0.0)


def band_metrics(bp: BandParameters, data: ClusterData) -> Tuple[float, float, float]:
    """(SSE, J_A, pi_out) re-derived from the coefficients."""
    theta_l, theta_u = band_values(bp, data.X)
    j_u = np.maximum(data.y - theta_u, 0.0)
    j_l = np.maximum(theta_l - data.y, 0.0)
    sse = float(np.sum((j_u + j_l) ** 2))
    area = float(np.sum(theta_u - theta_l))
    pi_out = float(np.mean((theta_u <= data.y) | (theta_l >= data.y)))
    return sse, area, pi_out


def _with_metrics(bp: BandParameters, data: ClusterData) -> BandParameters:
    sse, area, pi_out = band_metrics(bp, data)
    return bp.model_copy(update={"sse": sse, "area": area, "pi_out": pi_out})


def solve_blsef(
    data: ClusterData, beta: float, mode: ThermalMode = ThermalMode.COOLING
) -> Tuple[BandParameters, float, float, float]:
    """
    Solve the band QP for a single beta.

    Args:
        data: Cluster rows at one period
        beta: Weight of the squared error, in [0, 1]
        mode: Cooling (load coefficients <= 0) or heating (>= 0)

    Returns:
        (BandParameters, SSE, J_A, pi_out)

    Raises:
        DataValidationError: If beta is outside [0, 1]
        EmptyDatasetError: If the cluster has no points
        SolverError: If the QP does not reach optimality
    """
    _check_beta(beta)
    _require(data, f"band fit at t={data.t}")
    prog = build_blse_program(data, mode)
    result = solver_service.solve_weighted(prog, [blse_weights(beta)])[0]
    solver_service.require_optimal(result, f"band fit t={data.t} beta={beta:.4g}")
    bp = _with_metrics(_band_from_solution(result.x, data.t, mode, beta), data)
    return bp, bp.sse, bp.area, bp.pi_out


def sweep_report(
    data: ClusterData,
    M: int = 100,
    mode: ThermalMode = ThermalMode.COOLING,
    alpha: float = 0.05,
) -> BlseFitReport:
    """
    Fit every beta of the M-point grid and select for ``alpha``.

    Grid points the QP solver cannot finish are kept as unsolved records and
    never selected.

    Raises:
        SolverError: If no grid point solves
    """
    _require(data, f"band sweep at t={data.t}")
    grid = beta_grid(M)
    prog = build_blse_program(data, mode)
    results = solver_service.solve_weighted(prog, [blse_weights(b) for b in grid])
    records = []
    for beta, result in zip(grid, results):
        if not result.optimal:
            logger.warning("t=%d: band QP at beta=%.4g not solved (%s); skipped", data.t, beta, result.status)
            records.append(BlseSweepRecord(beta=float(beta), status=result.status))
            continue
        bp = _with_metrics(_band_from_solution(result.x, data.t, mode, beta), data)
        records.append(BlseSweepRecord(beta=float(beta), band=bp, sse=bp.sse, area=bp.area, pi_out=bp.pi_out))
    if not any(r.solved for r in records):
        raise SolverError(f"band sweep t={data.t}: no beta of the grid solved")
    report = BlseFitReport(records=tuple(records), selected_index=len(records) - 1, alpha=alpha)
    return select_from_sweep(report, alpha)


def _last_solved(solved: Sequence[bool]) -> int:
    return max(i for i, ok in enumerate(solved) if ok)


def _select_index(pi_out: Sequence[Optional[float]], area: Sequence[Optional[float]], alpha: float) -> Optional[int]:
    qualifying = [i for i, p in enumerate(pi_out) if p is not None and p <= alpha]
    if not qualifying:
        return None
    best = min(area[i] for i in qualifying)
    tol = TIE_TOLERANCE * max(1.0, abs(best))
    # grid is ascending in beta, so the first qualifying index is the smallest beta
    return next(i for i in qualifying if area[i] <= best + tol)


def select_from_sweep(report: BlseFitReport, alpha: float) -> BlseFitReport:
    """
    Pick the narrowest band whose out-of-band fraction is at most ``alpha``.

    When no beta qualifies the largest solved beta (beta = 1 unless that
    point failed) is returned with ``alpha_unmet`` set.
    """
    if not 0.0 < alpha < 1.0:
        raise DataValidationError(f"alpha must lie in (0, 1), got {alpha}")
    index = _select_index([r.pi_out for r in report.records], [r.area for r in report.records], alpha)
    unmet = index is None
    if unmet:
        index = _last_solved([r.solved for r in report.records])
        logger.warning(
            "t=%d: no beta reaches pi_out <= %.3f; using beta=%.4g (pi_out %.3f)",
            report.records[index].band.t,
            alpha,
            report.records[index].beta,
            report.records[index].pi_out,
        )
    return report.model_copy(update={"selected_index": index, "alpha": alpha, "alpha_unmet": unmet})


def selected_band(report: BlseFitReport) -> BandParameters:
    return report.selected.band.model_copy(update={"alpha_unmet": report.alpha_unmet})


def blse_sweep(
    data: ClusterData,
    alpha: float = 0.05,
    M: int = 100,
    mode: ThermalMode = ThermalMode.COOLING,
) -> BandParameters:
    """Robust band of a cluster: the beta sweep followed by the alpha selection."""
    return selected_band(sweep_report(data, M, mode, alpha))


def select_shared_beta(reports: Sequence[BlseFitReport], sizes: Sequence[int], alpha: float) -> List[BlseFitReport]:
    """
    Select one beta for all clusters of a period from pooled metrics.

    Pooled pi_out is weighted by cluster size; pooled area is the sum. Only
    grid points solved for every cluster take part.

    Raises:
        SolverError: If no grid point is solved for every cluster
    """
    total = float(sum(sizes))
    M = len(reports[0].records)
    solved = [all(r.records[i].solved for r in reports) for i in range(M)]
    if not any(solved):
        raise SolverError("shared beta: no grid point is solved for every cluster")
    pooled_pi = [
        sum(r.records[i].pi_out * n for r, n in zip(reports, sizes)) / total if solved[i] else None for i in range(M)
    ]
    pooled_area = [sum(r.records[i].area for r in reports) if solved[i] else None for i in range(M)]
    index = _select_index(pooled_pi, pooled_area, alpha)
    unmet = index is None
    if unmet:
        index = _last_solved(solved)
        logger.warning("shared beta: no grid point reaches pooled pi_out <= %.3f", alpha)
    return [r.model_copy(update={"selected_index": index, "alpha": alpha, "alpha_unmet": unmet}) for r in reports]


def fit_central(data: ClusterData, mode: ThermalMode = ThermalMode.COOLING) -> BandParameters:
    """
    Collapsed band: sign-constrained least squares of phi_in on the band features.

    Solved by bounded-variable least squares, so an exactly affine cluster is
    reproduced to rounding error. Upper and lower coefficients coincide.

    Raises:
        EmptyDatasetError: If the cluster has no points
        SolverError: If the least-squares iteration does not converge
    """
    _require(data, f"central fit at t={data.t}")
    t = data.t
    d = t + CONTEXT_SIZE
    lb = np.full(d, -np.inf)
    ub = np.full(d, np.inf)
    if mode is ThermalMode.COOLING:
        ub[:t] = 0.0
    else:
        lb[:t] = 0.0
    result = lsq_linear(data.X, data.y, bounds=(lb, ub), method="bvls", tol=1e-12)
    if not result.success:
        raise SolverError(f"central fit t={t}: {result.message}")
    coef = np.r_[result.x, result.x]
    bp = _band_from_solution(coef, t, mode, 0.0)
    return _with_metrics(bp, data)


def predict_band(bp: BandParameters, phi_0: float, phi_out_t: float, p) -> Tuple[float, float]:
    """(theta_L, theta_U) for one day; ``p`` is the load prefix p_1..p_t."""
    p = np.asarray(p, dtype=float)
    if p.shape != (bp.t,):
        raise DataValidationError(f"load vector must have length t={bp.t}, got {p.shape[0] if p.ndim else 0}")
    context = np.array([phi_0, phi_out_t, 1.0])
    upper = float(np.dot(bp.upper_load_coef, p) + np.dot(bp.upper_context_coef, context))
    lower = float(np.dot(bp.lower_load_coef, p) + np.dot(bp.lower_context_coef, context))
    return lower, upper


def compute_pi_out(bp: BandParameters, data: ClusterData) -> float:
    """Fraction of points on or outside the band."""
    _require(data, "pi_out")
    return band_metrics(bp, data)[2]


def compute_band_rmse(bp: BandParameters, data: ClusterData) -> float:
    """RMSE of the hinge errors (zero inside the band)."""
    _require(data, "band RMSE")
    j_u, j_l = hinge_errors(bp, data)
    return float(np.sqrt(np.mean((j_u + j_l) ** 2)))
