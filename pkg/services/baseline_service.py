"""RC-circuit regression baseline for indoor temperature prediction."""
import logging
from typing import Optional

import numpy as np

from errors import DataValidationError, EmptyDatasetError, RankDeficientError
from models import BaseLoadEstimate, HvacSource, RcParameters, TrainingDataset

logger = logging.getLogger(__name__)

MIN_DAYS = 3


def estimate_base_load(ds: TrainingDataset) -> BaseLoadEstimate:
    """
    Minimum observed load per (weekday/weekend, period).

    A day type without any days falls back to the minimum over all days.
    """
    if ds.size == 0:
        raise EmptyDatasetError("cannot estimate the base load without days")
    loads = ds.arrays().loads
    weekend = np.array([day.day_of_week.is_weekend for day in ds.days])
    overall = loads.min(axis=0)
    weekday_kw = loads[~weekend].min(axis=0) if (~weekend).any() else overall
    weekend_kw = loads[weekend].min(axis=0) if weekend.any() else overall
    return BaseLoadEstimate(weekday_kw=tuple(weekday_kw.tolist()), weekend_kw=tuple(weekend_kw.tolist()))


def hvac_matrix(
    ds: TrainingDataset,
    source: HvacSource,
    base: Optional[BaseLoadEstimate] = None,
) -> np.ndarray:
    """
    HVAC power per day and period, (K, T).

    Raises:
        DataValidationError: If true HVAC power is requested but not recorded
    """
    if source is HvacSource.TRUE_HVAC:
        missing = [day.day_id for day in ds.days if day.hvac_kw is None]
        if missing:
            raise DataValidationError(f"true HVAC power not recorded for day {missing[0]}")
        return np.array([day.hvac_kw for day in ds.days], dtype=float).reshape(ds.size, ds.periods)
    base = base or estimate_base_load(ds)
    base_rows = np.array([base.series(day.day_of_week) for day in ds.days]).reshape(ds.size, ds.periods)
    return np.maximum(ds.arrays().loads - base_rows, 0.0)


def _design(ds: TrainingDataset, hvac: np.ndarray, t: int):
    arrays = ds.arrays()
    current = arrays.indoor[:, t - 1]
    X = np.column_stack([current - arrays.outdoor[:, t - 1], hvac[:, t - 1], np.ones(ds.size)])
    return X, arrays.indoor[:, t] - current


def fit_rc(
    ds: TrainingDataset,
    hvac_source: HvacSource = HvacSource.TOTAL_MINUS_BASE_ESTIMATE,
    base: Optional[BaseLoadEstimate] = None,
    strict: bool = False,
) -> RcParameters:
    """
    Per-step least squares of the indoor temperature change.

    For t = 1..T-1 regresses ``phi_{t+1} - phi_t`` on
    ``[phi_t - phi_out_t, p_hvac_t, 1]``. A rank-deficient design yields the
    minimum-norm solution and is reported in ``rank_deficient_periods``.

    Args:
        ds: Training days
        hvac_source: Recorded HVAC power or total load minus estimated base load
        base: Base-load estimate to use (estimated from ``ds`` when omitted)
        strict: Raise instead of reporting rank deficiency

    Returns:
        RcParameters with one (a, b, d) triple per step t = 1..T-1

    Raises:
        EmptyDatasetError: With fewer than three days
        DataValidationError: With a single period per day
        RankDeficientError: If ``strict`` and a design matrix is rank deficient
    """
    if ds.size < MIN_DAYS:
        raise EmptyDatasetError(f"RC fit needs at least {MIN_DAYS} days, got {ds.size}")
    if ds.periods < 2:
        raise DataValidationError("RC fit needs at least two periods per day")
    hvac = hvac_matrix(ds, hvac_source, base)
    a, b, d, deficient = [], [], [], []
    for t in range(1, ds.periods):
        X, y = _design(ds, hvac, t)
        coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
        if rank < X.shape[1]:
            if strict:
                raise RankDeficientError(f"RC design matrix at t={t} has rank {rank} < {X.shape[1]}")
            deficient.append(t)
        a.append(float(coef[0]))
        b.append(float(coef[1]))
        d.append(float(coef[2]))
    if deficient:
        logger.warning("RC design rank deficient at periods %s; minimum-norm coefficients used", deficient)
    return RcParameters(a=tuple(a), b=tuple(b), d=tuple(d), hvac_source=hvac_source, rank_deficient_periods=tuple(deficient))


def predict_rc(params: RcParameters, t: int, phi_t: float, phi_out_t: float, hvac_t: float) -> float:
    """One-step prediction of ``phi_{t+1}`` from the period-t readings."""
    i = t - 1
    return phi_t + params.a[i] * (phi_t - phi_out_t) + params.b[i] * hvac_t + params.d[i]


def rollout_rc(params: RcParameters, phi_1: float, outdoor_temp_c, hvac_kw) -> np.ndarray:
    """
    Multi-step prediction chaining one-step predictions from ``phi_1``.

    ``outdoor_temp_c`` and ``hvac_kw`` cover periods 1..n; the result holds
    ``phi_2 .. phi_{n+1}``.
    """
    outdoor = np.asarray(outdoor_temp_c, dtype=float)
    hvac = np.asarray(hvac_kw, dtype=float)
    if outdoor.shape != hvac.shape or outdoor.shape[0] > params.steps:
        raise DataValidationError("outdoor and HVAC series must match and fit the fitted horizon")
    trajectory = np.zeros(outdoor.shape[0])
    phi = phi_1
    for t in range(1, outdoor.shape[0] + 1):
        phi = predict_rc(params, t, phi, outdoor[t - 1], hvac[t - 1])
        trajectory[t - 1] = phi
    return trajectory


def rc_errors(params: RcParameters, ds: TrainingDataset, base: Optional[BaseLoadEstimate] = None) -> np.ndarray:
    """One-step prediction errors per day and predicted period 2..T, (K, T-1)."""
    if ds.size == 0:
        raise EmptyDatasetError("RC errors need at least one day")
    if ds.periods != params.periods:
        raise DataValidationError(f"RC model covers {params.periods} periods, data has {ds.periods}")
    hvac = hvac_matrix(ds, params.hvac_source, base)
    errors = np.zeros((ds.size, params.steps))
    for t in range(1, ds.periods):
        X, y = _design(ds, hvac, t)
        i = t - 1
        errors[:, i] = y - X @ np.array([params.a[i], params.b[i], params.d[i]])
    return errors


def rc_rmse(params: RcParameters, ds: TrainingDataset, base: Optional[BaseLoadEstimate] = None) -> float:
    """RMSE of one-step predictions over every day and predicted period of ``ds``."""
    return float(np.sqrt(np.mean(rc_errors(params, ds, base) ** 2)))
