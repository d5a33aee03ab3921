"""
Shared fixtures: hand-built days, synthetic datasets and box regions.
"""
from typing import Optional, Sequence

import numpy as np
import pytest

from models import (
    BandParameters,
    ClusterModel,
    DatasetRole,
    DayOfWeek,
    DayRecord,
    FeasibleRegion,
    ModelBundle,
    PeriodModel,
    RegionParameters,
    SelectorTree,
    ThermalMode,
    TrainingConfig,
    TrainingDataset,
    TreeNode,
    TreeParams,
)


def make_day(
    day_id: int,
    loads: Sequence[float],
    indoor: Sequence[float],
    outdoor: Sequence[float],
    phi_0: float = 22.0,
    day_of_week: DayOfWeek = DayOfWeek.MON,
    solar: Optional[Sequence[float]] = None,
    hvac: Optional[Sequence[float]] = None,
) -> DayRecord:
    return DayRecord(
        day_id=day_id,
        day_of_week=day_of_week,
        initial_indoor_temp_c=phi_0,
        load_kw=tuple(float(v) for v in loads),
        indoor_temp_c=tuple(float(v) for v in indoor),
        outdoor_temp_c=tuple(float(v) for v in outdoor),
        solar_wm2=tuple(float(v) for v in (solar if solar is not None else [0.0] * len(loads))),
        hvac_kw=None if hvac is None else tuple(float(v) for v in hvac),
    )


def linear_dataset(
    n_days: int,
    periods: int,
    seed: int,
    noise_std: float = 0.1,
    two_regimes: bool = False,
    role: DatasetRole = DatasetRole.TRAIN,
) -> TrainingDataset:
    """
    Days whose indoor temperature is affine in the loads, phi_0 and outdoor
    temperature, plus noise. With ``two_regimes`` weekends run at low load,
    a steeper load response and a warmer offset.
    """
    rng = np.random.default_rng(seed)
    days = []
    for k in range(n_days):
        dow = DayOfWeek.MON.shift(k)
        weekend = two_regimes and dow.is_weekend
        phi_0 = 24.0 + rng.normal(0.0, 0.5)
        outdoor = 28.0 + 4.0 * np.sin(np.arange(periods)) + rng.normal(0.0, 1.0, periods)
        loads = rng.uniform(0.5, 2.0, periods) if weekend else rng.uniform(6.0, 12.0, periods)
        gain = -1.0 if weekend else -0.25
        offset = 6.0 if weekend else 2.0
        indoor = np.array(
            [
                0.5 * phi_0 + 0.3 * outdoor[t] + gain * loads[t] - 0.02 * loads[:t].sum() + offset
                for t in range(periods)
            ]
        )
        indoor = indoor + rng.normal(0.0, noise_std, periods)
        days.append(make_day(k + 1, loads, indoor, outdoor, phi_0, dow, solar=rng.uniform(0, 800, periods)))
    return TrainingDataset(days=tuple(days), periods=periods, role=role)


def flat_band(t: int, theta_c: float, width_c: float = 0.0) -> BandParameters:
    """Band independent of the loads: [theta - width, theta]."""
    return BandParameters(
        t=t,
        upper_load_coef=(0.0,) * t,
        lower_load_coef=(0.0,) * t,
        upper_context_coef=(0.0, 0.0, theta_c),
        lower_context_coef=(0.0, 0.0, theta_c - width_c),
    )


def box_region(p_min: Sequence[float], p_max: Sequence[float], theta_c: float = 22.0) -> FeasibleRegion:
    """Region whose only binding constraints are the load limits."""
    periods = len(p_min)
    parameters = tuple(
        RegionParameters(
            t=t,
            p_min_kw=p_min[t - 1],
            p_max_kw=p_max[t - 1],
            theta_min_c=theta_c - 5.0,
            theta_max_c=theta_c + 5.0,
            band=flat_band(t, theta_c, 1.0),
        )
        for t in range(1, periods + 1)
    )
    return FeasibleRegion(
        periods=periods,
        parameters=parameters,
        initial_indoor_temp_c=theta_c,
        outdoor_temp_c=(25.0,) * periods,
    )


@pytest.fixture
def small_dataset() -> TrainingDataset:
    return linear_dataset(n_days=40, periods=3, seed=11)


@pytest.fixture
def two_regime_dataset() -> TrainingDataset:
    return linear_dataset(n_days=56, periods=3, seed=5, two_regimes=True)


def flat_bundle(periods: int, theta_c: float = 22.0, width_c: float = 1.0, building: str = "flat") -> ModelBundle:
    """One cluster per period, a leaf tree and a load-independent band."""
    period_models = []
    for t in range(1, periods + 1):
        dim = t + 3
        clusters = ClusterModel(
            t=t,
            n_clusters=1,
            centroids=((0.0,) * dim,),
            day_ids=(),
            labels=(),
            row_mean=(0.0,) * dim,
            row_scale=(1.0,) * dim,
            degenerate_rows=(False,) * dim,
            sse=0.0,
        )
        region = RegionParameters(
            t=t,
            p_min_kw=0.0,
            p_max_kw=20.0,
            theta_min_c=theta_c - 5.0,
            theta_max_c=theta_c + 5.0,
            band=flat_band(t, theta_c, width_c),
        )
        tree = SelectorTree(t=t, nodes=(TreeNode(kind="leaf", label=1),), classes=(1,), training_accuracy=1.0)
        period_models.append(PeriodModel(t=t, clusters=clusters, regions=(region,), tree=tree))
    return ModelBundle(
        building=building,
        periods=periods,
        mode=ThermalMode.COOLING,
        alpha=0.05,
        beta_grid_size=2,
        seed=0,
        feature_schema=("day_of_week", "outdoor_temp_c", "daily_mean_outdoor_c", "solar_wm2"),
        period_models=tuple(period_models),
    )


def fast_training_config(**overrides) -> TrainingConfig:
    settings = dict(
        cluster_candidates=(1, 2),
        beta_grid_size=5,
        selection_beta_grid_size=4,
        kmeans_restarts=2,
        tree=TreeParams(max_depth=4, min_leaf=2),
        alpha=0.2,
    )
    settings.update(overrides)
    return TrainingConfig(**settings)
