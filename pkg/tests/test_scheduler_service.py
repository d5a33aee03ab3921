import numpy as np
import pytest

from conftest import box_region, fast_training_config, flat_band, flat_bundle
from errors import DataValidationError, InfeasibleProgramError
from models import (
    BuildingSchedule,
    DayOfWeek,
    FeasibleRegion,
    PlantConfig,
    RegionParameters,
    Schedule,
    WindScenarioSet,
)
from services import plant_service, region_service, scheduler_service, training_service

P_MIN = [2.0, 2.0]
P_MAX = [8.0, 8.0]


def two_period_wind() -> WindScenarioSet:
    # 12 h periods: deviations are (-10, 5) and (10, -5) kW
    return WindScenarioSet.from_weights([[0.0, 120.0], [240.0, 0.0]])


def zero_noise(periods: int, scenarios: int = 1):
    return scheduler_service.sample_load_noise([0.0], scenarios, seed=0, periods=periods)


def test_program_size_follows_layout():
    regions = [box_region(P_MIN, P_MAX)] * 3
    wind = two_period_wind()
    noise = scheduler_service.sample_load_noise([0.1], 4, seed=1, periods=2)
    problem = scheduler_service.build_program(regions, [1.0], 2.0, wind, noise)
    N, T, W, B = 3, 2, 2, 4
    assert problem.layout.n_vars == N * T + N * W * T + T + 2 * W * B * T
    assert problem.program.q.shape == (problem.layout.n_vars,)
    assert problem.names == ("building_1", "building_2", "building_3")


def test_zero_compensation_runs_at_minimum_load():
    regions = [box_region(P_MIN, P_MAX), box_region([1.0, 0.5], [3.0, 3.0])]
    schedule = scheduler_service.solve_program(
        scheduler_service.build_program(regions, [1.0], 0.0, two_period_wind(), zero_noise(2))
    )
    np.testing.assert_allclose(schedule.buildings[0].base_load_kw, P_MIN, atol=1e-7)
    np.testing.assert_allclose(schedule.buildings[1].base_load_kw, [1.0, 0.5], atol=1e-7)
    assert schedule.energy_cost == pytest.approx(5.5, abs=1e-7)


def test_no_forecast_error_means_no_recourse():
    wind = WindScenarioSet.from_weights([[60.0, 60.0], [60.0, 60.0]])
    regions = [box_region(P_MIN, P_MAX), box_region(P_MIN, P_MAX)]
    schedule = scheduler_service.solve_program(
        scheduler_service.build_program(regions, [1.0, 2.0], 3.0, wind, zero_noise(2))
    )
    recourse_total = sum(np.asarray(b.scenario_load_kw) for b in schedule.buildings)
    for w in range(2):
        np.testing.assert_allclose(recourse_total[w], schedule.aggregate_base_kw, atol=1e-6)
    assert schedule.balancing_cost == pytest.approx(0.0, abs=1e-6)


def _box_distance(x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    return np.maximum(lo - x, 0.0) + np.maximum(x - hi, 0.0)


def test_single_building_matches_grid_search():
    tau, v = 1.0, 4.0
    wind = two_period_wind()
    delta = scheduler_service.deviations_kw(wind)
    schedule = scheduler_service.solve_program(
        scheduler_service.build_program([box_region(P_MIN, P_MAX)], [tau], v, wind, zero_noise(2))
    )
    # the recourse is free within the box, so each period separates
    best = 0.0
    grid = np.linspace(P_MIN[0], P_MAX[0], 601)
    for t in range(2):
        cost = tau * grid + v * sum(0.5 * _box_distance(grid + delta[w, t], P_MIN[t], P_MAX[t]) for w in range(2))
        best += float(cost.min())
    assert schedule.objective == pytest.approx(best, abs=0.1)
    assert schedule.objective == pytest.approx(41.0, abs=1e-6)
    assert schedule.energy_cost + schedule.balancing_cost == pytest.approx(schedule.objective)


def _hand_schedule(base, recourse) -> Schedule:
    return Schedule(
        status="optimal",
        tau=(1.0, 1.0),
        v=1.0,
        buildings=(BuildingSchedule(name="b", base_load_kw=tuple(base), scenario_load_kw=tuple(map(tuple, recourse))),),
        aggregate_base_kw=tuple(base),
        objective=0.0,
        energy_cost=0.0,
        balancing_cost=0.0,
    )


def test_mitigation_of_idle_and_perfect_response():
    wind = two_period_wind()
    delta = scheduler_service.deviations_kw(wind)
    base = np.array([5.0, 5.0])
    idle = _hand_schedule(base, [base, base])
    perfect = _hand_schedule(base, [base + delta[0], base + delta[1]])
    noise = zero_noise(2)
    assert scheduler_service.mitigation_metric(idle, wind, noise) == pytest.approx(0.0)
    assert scheduler_service.mitigation_metric(perfect, wind, noise) == pytest.approx(1.0)


def test_mitigation_needs_forecast_error():
    wind = WindScenarioSet.from_weights([[1.0, 1.0]])
    schedule = _hand_schedule([5.0, 5.0], [[5.0, 5.0]])
    with pytest.raises(DataValidationError):
        scheduler_service.mitigation_metric(schedule, wind, zero_noise(2))


def test_compensation_sweep_is_monotone():
    wind = scheduler_service.generate_wind_scenarios(2, 6, capacity_kw=12.0, seed=5)
    noise = scheduler_service.sample_load_noise([0.2], 3, seed=6, periods=2)
    regions = [box_region(P_MIN, P_MAX), box_region([1.0, 1.0], [5.0, 6.0])]
    rows = scheduler_service.sweep_compensation(regions, ["a", "b"], [1.0], [4.0, 0.0, 1.0, 2.0, 8.0], wind, noise)
    assert [r["v"] for r in rows] == [0.0, 1.0, 2.0, 4.0, 8.0]
    l1 = [r["balancing_cost"] / r["v"] for r in rows[1:]]
    assert all(b <= a + 1e-5 for a, b in zip(l1, l1[1:]))
    mitigation = [r["mitigation"] for r in rows[1:]]
    assert all(b >= a - 1e-5 for a, b in zip(mitigation, mitigation[1:]))


def test_zero_noise_covariance():
    noise = zero_noise(3, scenarios=4)
    np.testing.assert_array_equal(noise.matrix(), np.zeros((4, 3)))


def test_noise_covariance_is_recovered():
    noise = scheduler_service.sample_load_noise([0.5, [1.0, 2.0]], 20000, seed=3, periods=2)
    np.testing.assert_allclose(noise.covariance, np.diag([1.5, 2.5]))
    sample = np.cov(noise.matrix().T)
    np.testing.assert_allclose(sample, np.diag([1.5, 2.5]), atol=0.1)


def test_non_psd_covariance_is_rejected():
    with pytest.raises(DataValidationError, match="positive semidefinite"):
        scheduler_service.sample_load_noise([[[1.0, 2.0], [2.0, 1.0]]], 5, seed=0, periods=2)
    with pytest.raises(DataValidationError, match="symmetric"):
        scheduler_service.sample_load_noise([[[1.0, 0.5], [0.0, 1.0]]], 5, seed=0, periods=2)
    with pytest.raises(DataValidationError):
        scheduler_service.sample_load_noise([[1.0, 1.0, 1.0]], 5, seed=0, periods=2)


def test_noise_covariances_broadcast():
    assert scheduler_service.noise_covariances([0.3], 3) == pytest.approx([0.09] * 3)
    with pytest.raises(DataValidationError):
        scheduler_service.noise_covariances([0.3, 0.2], 3)


def test_wind_scenarios_stay_within_capacity():
    wind = scheduler_service.generate_wind_scenarios(24, 50, capacity_kw=10.0, seed=8)
    generation = wind.matrix()
    assert generation.shape == (50, 24)
    assert generation.min() >= 0.0
    assert generation.max() <= 10.0 * 1.0 + 1e-9
    assert wind.probabilities == pytest.approx((1 / 50,) * 50)
    again = scheduler_service.generate_wind_scenarios(24, 50, capacity_kw=10.0, seed=8)
    assert again == wind
    with pytest.raises(DataValidationError):
        scheduler_service.generate_wind_scenarios(24, 5, capacity_kw=0.0, seed=8)


def test_tau_series():
    np.testing.assert_array_equal(scheduler_service.tau_series([2.0], 3), [2.0, 2.0, 2.0])
    with pytest.raises(DataValidationError):
        scheduler_service.tau_series([1.0, 2.0], 3)


def test_build_program_checks_inputs():
    wind, noise = two_period_wind(), zero_noise(2)
    with pytest.raises(DataValidationError):
        scheduler_service.build_program([], [1.0], 1.0, wind, noise)
    with pytest.raises(DataValidationError):
        scheduler_service.build_program([box_region([1.0] * 3, [2.0] * 3)], [1.0], 1.0, wind, noise)
    with pytest.raises(DataValidationError):
        scheduler_service.build_program([box_region(P_MIN, P_MAX)], [1.0], -1.0, wind, noise)


def test_empty_region_makes_program_infeasible():
    blocked = RegionParameters(t=1, p_min_kw=0.0, p_max_kw=5.0, theta_min_c=17.0, theta_max_c=27.0, band=flat_band(1, 30.0))
    region = FeasibleRegion(periods=1, parameters=(blocked,), initial_indoor_temp_c=22.0, outdoor_temp_c=(25.0,))
    wind = WindScenarioSet.from_weights([[0.0], [24.0]])
    with pytest.raises(InfeasibleProgramError):
        scheduler_service.solve_program(scheduler_service.build_program([region], [1.0], 1.0, wind, zero_noise(1)))


@pytest.fixture(scope="module")
def office_day():
    cfg = PlantConfig.preset("office_1")
    target = scheduler_service.simulate_target_day(cfg, seed=4, day_of_week=DayOfWeek.WED, periods=24)
    return scheduler_service.building_day(flat_bundle(24, building="office_1"), cfg, target)


def test_target_day_has_requested_weekday(office_day):
    assert office_day.conditions.day_of_week is DayOfWeek.WED
    assert office_day.clusters == (1,) * 24
    assert office_day.region.periods == 24


def test_robustness_sweep_reports_violation(office_day):
    wind = scheduler_service.generate_wind_scenarios(24, 3, capacity_kw=5.0, seed=2)
    noise = zero_noise(24)
    rows = scheduler_service.sweep_robustness({0.05: [office_day]}, [1.0], 2.0, wind, noise)
    assert len(rows) == 1
    row = rows[0]
    assert row["alpha"] == 0.05
    assert row["violation_ch"] >= 0.0
    assert row["violation_ch_office_1"] == row["violation_ch"]


def test_building_sweep_counts_variables():
    wind, noise = two_period_wind(), zero_noise(2)
    rows = scheduler_service.sweep_buildings([box_region(P_MIN, P_MAX)], [3, 1], [1.0], 1.0, wind, noise)
    assert [r["buildings"] for r in rows] == [1, 3]
    for row in rows:
        N = row["buildings"]
        assert row["variables"] == N * 2 + N * 2 * 2 + 2 + 2 * 2 * 1 * 2
        assert row["solve_s"] >= 0.0
    assert rows[1]["objective"] > rows[0]["objective"]


def test_schedule_loads_lie_in_their_regions():
    regions = [box_region(P_MIN, P_MAX), box_region([1.0, 1.0], [5.0, 6.0])]
    wind = scheduler_service.generate_wind_scenarios(2, 4, capacity_kw=12.0, seed=9)
    schedule = scheduler_service.solve_program(
        scheduler_service.build_program(regions, [1.0], 2.0, wind, zero_noise(2), ["a", "b"])
    )
    for building, region in zip(schedule.buildings, regions):
        assert region_service.contains(region, building.base_load_kw, 1e-6).contained
        for load in building.scenario_load_kw:
            assert region_service.contains(region, load, 1e-6).contained


ALPHA_GRID = (0.01, 0.05, 0.1, 0.3)
FLEET = ("office_1", "office_2", "supermarket")


@pytest.fixture(scope="module")
def fleet():
    """Days of three trained buildings per alpha, with one third of their peak as wind capacity."""
    cfg = fast_training_config(beta_grid_size=12, alpha=0.05)
    days_by_alpha = {alpha: [] for alpha in ALPHA_GRID}
    peak_kw = 0.0
    for i, name in enumerate(FLEET):
        plant = PlantConfig.preset(name)
        run = plant_service.generate_days(plant, n_days=60, seed=30 + i, periods=24)
        peak_kw += float(run.dataset.arrays().loads.max())
        bundle = training_service.train_bundle(run.dataset, name, cfg, i, 1)
        target = scheduler_service.simulate_target_day(plant, seed=40 + i, day_of_week=DayOfWeek.WED, periods=24)
        for alpha in ALPHA_GRID:
            days_by_alpha[alpha].append(scheduler_service.building_day(bundle, plant, target, alpha))
    wind = scheduler_service.generate_wind_scenarios(24, 10, capacity_kw=peak_kw / 3.0, seed=7)
    return days_by_alpha, wind


@pytest.mark.slow
def test_looser_robustness_trades_comfort_for_mitigation(fleet):
    days_by_alpha, wind = fleet
    rows = scheduler_service.sweep_robustness(days_by_alpha, [1.0], 2.0, wind, zero_noise(24))
    assert [r["alpha"] for r in rows] == list(ALPHA_GRID)
    mitigation = [r["mitigation"] for r in rows]
    violation = [r["violation_ch"] for r in rows]
    assert all(b >= a - 1e-6 for a, b in zip(mitigation, mitigation[1:]))
    assert all(b >= a - 1e-6 for a, b in zip(violation, violation[1:]))


@pytest.mark.slow
def test_mitigation_magnitude_at_moderate_compensation(fleet):
    days_by_alpha, wind = fleet
    days = days_by_alpha[0.05]
    rows = scheduler_service.sweep_compensation(
        [d.region for d in days], [d.name for d in days], [1.0], [2.0], wind, zero_noise(24)
    )
    assert 0.10 <= rows[0]["mitigation"] <= 0.50
