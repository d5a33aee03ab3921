"""Load/temperature limits, region assembly, membership and constraint export."""
import logging
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from errors import DataValidationError, EmptyDatasetError, EmptyRegionError, SolverError
from models import (
    BlseFitReport,
    ConvexProgram,
    ExplanatoryRecord,
    FeasibleRegion,
    ModelBundle,
    PeriodModel,
    RegionParameters,
    TrainingDataset,
)
from services import band_service, selector_service, solver_service

logger = logging.getLogger(__name__)


class Limits(NamedTuple):
    p_min_kw: float
    p_max_kw: float
    theta_min_c: float
    theta_max_c: float


class Membership(NamedTuple):
    contained: bool
    violated: List[str]


def estimate_limits(ds: TrainingDataset, day_ids: Sequence[int], t: int) -> Limits:
    """
    Observed load and indoor temperature extremes of a cluster at period ``t``.

    Raises:
        EmptyDatasetError: If no day of ``day_ids`` is in ``ds``
    """
    if not 1 <= t <= ds.periods:
        raise DataValidationError(f"period {t} outside 1..{ds.periods}")
    arrays = ds.arrays()
    mask = np.isin(arrays.day_ids, np.asarray(list(day_ids), dtype=int))
    if not mask.any():
        raise EmptyDatasetError(f"cannot estimate limits of an empty cluster at t={t}")
    loads = arrays.loads[mask, t - 1]
    temps = arrays.indoor[mask, t - 1]
    return Limits(float(loads.min()), float(loads.max()), float(temps.min()), float(temps.max()))


def region_parameters(
    limits: Limits,
    report: BlseFitReport,
    cluster: int,
    t: int,
    keep_sweep: bool = True,
) -> RegionParameters:
    return RegionParameters(
        cluster=cluster,
        t=t,
        p_min_kw=limits.p_min_kw,
        p_max_kw=limits.p_max_kw,
        theta_min_c=limits.theta_min_c,
        theta_max_c=limits.theta_max_c,
        band=band_service.selected_band(report),
        sweep=report if keep_sweep else None,
    )


def reselect(phi: RegionParameters, alpha: float) -> RegionParameters:
    """Same region parameters with the band re-selected from the stored sweep."""
    if phi.sweep is None:
        raise DataValidationError(f"no stored sweep for cluster {phi.cluster} at t={phi.t}; retrain to change alpha")
    report = band_service.select_from_sweep(phi.sweep, alpha)
    return phi.model_copy(update={"band": band_service.selected_band(report), "sweep": report})


def assemble_region(
    parameters: Sequence[RegionParameters],
    phi_0: float,
    outdoor_temp_c: Sequence[float],
    band_ordering: bool = True,
    check_nonempty: bool = True,
) -> FeasibleRegion:
    """
    Build the region of one day from the per-period parameters.

    Args:
        parameters: One RegionParameters per period, ordered t = 1..T
        phi_0: Initial indoor temperature of the day
        outdoor_temp_c: Outdoor temperature forecast, length T
        band_ordering: Whether to add upper-above-lower rows to the export
        check_nonempty: Whether to check the region with a feasibility LP

    Raises:
        DataValidationError: If a period is missing or out of order
        EmptyRegionError: If no load profile satisfies the constraints
    """
    periods = len(outdoor_temp_c)
    have = [phi.t for phi in parameters]
    missing = sorted(set(range(1, periods + 1)) - set(have))
    if missing:
        raise DataValidationError(f"region is missing period(s) {missing}")
    if have != list(range(1, periods + 1)):
        raise DataValidationError("region parameters must be ordered t = 1..T without repeats")
    region = FeasibleRegion(
        periods=periods,
        parameters=tuple(parameters),
        initial_indoor_temp_c=float(phi_0),
        outdoor_temp_c=tuple(float(v) for v in outdoor_temp_c),
        band_ordering=band_ordering,
    )
    if check_nonempty:
        ensure_nonempty(region)
    return region


def _context(region: FeasibleRegion, t: int) -> np.ndarray:
    return np.array([region.initial_indoor_temp_c, region.outdoor_temp_c[t - 1], 1.0])


def constraint_labels(region: FeasibleRegion) -> List[str]:
    T = region.periods
    kinds = ["p_max", "p_min", "theta_max", "theta_min"] + (["band_order"] if region.band_ordering else [])
    return [f"{kind}[{t}]" for kind in kinds for t in range(1, T + 1)]


def export_constraints(region: FeasibleRegion) -> Tuple[np.ndarray, np.ndarray]:
    """
    Linear description ``G p <= h`` of the region.

    Rows, in blocks of T: upper load bounds, lower load bounds, upper band
    under theta_max, lower band over theta_min and, when enabled, lower band
    under upper band.
    """
    T = region.periods
    blocks = 5 if region.band_ordering else 4
    G = np.zeros((blocks * T, T))
    h = np.zeros(blocks * T)
    for phi in region.parameters:
        t = phi.t
        i = t - 1
        ctx = _context(region, t)
        band = phi.band
        upper_load = np.asarray(band.upper_load_coef)
        lower_load = np.asarray(band.lower_load_coef)
        upper_ctx = float(np.dot(band.upper_context_coef, ctx))
        lower_ctx = float(np.dot(band.lower_context_coef, ctx))

        G[i, i] = 1.0
        h[i] = phi.p_max_kw
        G[T + i, i] = -1.0
        h[T + i] = -phi.p_min_kw
        G[2 * T + i, :t] = upper_load
        h[2 * T + i] = phi.theta_max_c - upper_ctx
        G[3 * T + i, :t] = -lower_load
        h[3 * T + i] = lower_ctx - phi.theta_min_c
        if region.band_ordering:
            G[4 * T + i, :t] = lower_load - upper_load
            h[4 * T + i] = upper_ctx - lower_ctx
    return G, h


def contains(region: FeasibleRegion, p, tolerance: float = 1e-9) -> Membership:
    """
    Membership test, evaluated on the exported rows.

    Returns:
        Whether every row holds within ``tolerance`` and the labels of the violated rows

    Raises:
        DataValidationError: If ``p`` does not have T entries
    """
    p = np.asarray(p, dtype=float)
    if p.shape != (region.periods,):
        raise DataValidationError(f"load profile must have {region.periods} periods")
    G, h = export_constraints(region)
    violated = np.flatnonzero(G @ p - h > tolerance)
    labels = constraint_labels(region)
    return Membership(violated.size == 0, [labels[i] for i in violated])


def min_total_load(region: FeasibleRegion) -> Tuple[float, np.ndarray]:
    """Smallest cumulative load over the region and a profile attaining it."""
    G, h = export_constraints(region)
    result = solver_service.solve(ConvexProgram(q=np.ones(region.periods), A_ub=G, b_ub=h))
    if result.status == solver_service.INFEASIBLE:
        raise EmptyRegionError("region is empty")
    solver_service.require_optimal(result, "minimum total load")
    return float(result.objective), result.x


def ensure_nonempty(region: FeasibleRegion) -> None:
    G, h = export_constraints(region)
    result = solver_service.solve(ConvexProgram(q=np.zeros(region.periods), A_ub=G, b_ub=h))
    if result.status == solver_service.INFEASIBLE:
        raise EmptyRegionError(
            f"limits and bands admit no load profile for phi_0={region.initial_indoor_temp_c:.2f}"
        )
    if not result.optimal:
        raise SolverError(f"region feasibility check returned status '{result.status}'")


def period_parameters(bundle: ModelBundle, period: PeriodModel, alpha: Optional[float]) -> List[RegionParameters]:
    """Every cluster's parameters at one period, re-selected when ``alpha`` differs from training."""
    if alpha is None or alpha == bundle.alpha:
        return list(period.regions)
    if not bundle.shared_beta:
        return [reselect(phi, alpha) for phi in period.regions]
    if any(phi.sweep is None for phi in period.regions):
        raise DataValidationError(f"no stored sweeps at t={period.t}; retrain to change alpha")
    sizes = [len(period.clusters.members(phi.cluster)) for phi in period.regions]
    reports = band_service.select_shared_beta([phi.sweep for phi in period.regions], sizes, alpha)
    return [
        phi.model_copy(update={"band": band_service.selected_band(report), "sweep": report})
        for phi, report in zip(period.regions, reports)
    ]


def instantiate_region(
    bundle: ModelBundle,
    explanatory: Sequence[ExplanatoryRecord],
    phi_0: float,
    outdoor_temp_c: Sequence[float],
    alpha: Optional[float] = None,
    band_ordering: bool = True,
) -> Tuple[FeasibleRegion, List[int]]:
    """
    Region of a new day: pick each period's cluster with its tree, optionally
    re-select the bands for another ``alpha``, and assemble.

    Returns:
        The region and the chosen cluster per period
    """
    if len(explanatory) != bundle.periods or len(outdoor_temp_c) != bundle.periods:
        raise DataValidationError(f"need {bundle.periods} explanatory records and outdoor temperatures")
    chosen = []
    parameters = []
    for period, record in zip(bundle.period_models, explanatory):
        c = selector_service.predict_cluster(period.tree, record)
        chosen.append(c)
        parameters.append(period_parameters(bundle, period, alpha)[c - 1])
    logger.debug("%s: clusters per period %s", bundle.building, chosen)
    region = assemble_region(parameters, phi_0, outdoor_temp_c, band_ordering=band_ordering)
    return region, chosen
