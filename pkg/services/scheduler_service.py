"""
Aggregator scheduling: a two-stage stochastic LP balancing wind forecast errors
with the flexibility of several buildings.

First stage: a base load ``p^b_i`` per building. Second stage: a recourse load
``p_{i,w}`` per building and wind scenario. Load noise enters only through the
aggregate scenario load, so the recourse cannot hedge it.
"""
import logging
import time
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from errors import DataValidationError, InfeasibleProgramError, SolverError, UnboundedProgramError
from models import (
    BuildingSchedule,
    ConvexProgram,
    DayConditions,
    DayOfWeek,
    DayRecord,
    FeasibleRegion,
    LoadNoiseSet,
    ModelBundle,
    PlantConfig,
    PlantState,
    ProgramLayout,
    Schedule,
    StochasticProgram,
    WindScenarioSet,
)
from services import plant_service, region_service, solver_service

logger = logging.getLogger(__name__)

MEMBERSHIP_TOLERANCE = 1e-6
PSD_TOLERANCE = 1e-9
WIND_PERSISTENCE = 0.8
WIND_DEVIATION_SHARE = 0.25
WARMUP_DAYS = 14


class BuildingDay(NamedTuple):
    """A building's target day: its region plus the plant data to evaluate schedules."""

    name: str
    region: FeasibleRegion
    plant: PlantConfig
    conditions: DayConditions
    initial_state: PlantState
    clusters: Tuple[int, ...] = ()


class TargetDay(NamedTuple):
    record: DayRecord
    conditions: DayConditions
    initial_state: PlantState


def simulate_target_day(cfg: PlantConfig, seed: int, day_of_week: DayOfWeek, periods: int) -> TargetDay:
    """
    Simulate two weeks of a plant and return the last day of the requested weekday.

    The record's weather stands in for the day-ahead forecast.
    """
    run = plant_service.generate_days(cfg, WARMUP_DAYS, seed, DayOfWeek.MON, periods)
    k = max(i for i, day in enumerate(run.dataset.days) if day.day_of_week is day_of_week)
    return TargetDay(run.dataset.days[k], run.conditions[k], run.initial_states[k])


def building_day(
    bundle: ModelBundle,
    cfg: PlantConfig,
    target: TargetDay,
    alpha: Optional[float] = None,
) -> BuildingDay:
    """Instantiate a building's region for its target day."""
    record = target.record
    region, chosen = region_service.instantiate_region(
        bundle,
        record.explanatory_series(),
        record.initial_indoor_temp_c,
        record.outdoor_temp_c,
        alpha,
    )
    logger.info("%s: region for %s built from clusters %s", bundle.building, record.day_of_week.value, chosen)
    return BuildingDay(bundle.building, region, cfg, target.conditions, target.initial_state, tuple(chosen))


def period_hours(periods: int) -> float:
    return 24.0 / periods


def tau_series(tau: Sequence[float], periods: int) -> np.ndarray:
    """Energy price per period; a single value is a flat price."""
    tau = np.asarray(tau, dtype=float)
    if tau.shape == (1,):
        return np.full(periods, float(tau[0]))
    if tau.shape != (periods,):
        raise DataValidationError(f"price series must have 1 or {periods} entries, got {tau.shape[0]}")
    return tau


def deviations_kw(wind: WindScenarioSet) -> np.ndarray:
    """Wind forecast errors as average power per period, (W, T)."""
    return wind.deviations() / period_hours(wind.periods)


def generate_wind_scenarios(periods: int, n_scenarios: int, capacity_kw: float, seed: int) -> WindScenarioSet:
    """
    Synthetic wind scenarios around a diurnal forecast.

    Deviations follow an AR(1) process; generation is clipped to
    ``[0, capacity]`` and reported as energy per period.
    """
    if capacity_kw <= 0:
        raise DataValidationError("wind capacity must be > 0")
    if n_scenarios < 1:
        raise DataValidationError("at least one wind scenario required")
    rng = np.random.default_rng(seed)
    clock = (np.arange(1, periods + 1) - 0.5) * 24.0 / periods
    forecast = capacity_kw * (0.5 + 0.15 * np.cos(2.0 * np.pi * (clock - 3.0) / 24.0))
    sigma = WIND_DEVIATION_SHARE * capacity_kw
    innovations = rng.standard_normal((n_scenarios, periods))
    deviation = np.zeros((n_scenarios, periods))
    deviation[:, 0] = sigma * innovations[:, 0]
    for t in range(1, periods):
        deviation[:, t] = WIND_PERSISTENCE * deviation[:, t - 1] + np.sqrt(1.0 - WIND_PERSISTENCE**2) * sigma * innovations[:, t]
    power = np.clip(forecast + deviation, 0.0, capacity_kw)
    return WindScenarioSet.from_weights(power * period_hours(periods))


def _covariance(spec, periods: int) -> np.ndarray:
    cov = np.asarray(spec, dtype=float)
    if cov.ndim == 0:
        return float(cov) * np.eye(periods)
    if cov.ndim == 1:
        if cov.shape != (periods,):
            raise DataValidationError(f"diagonal covariance must have {periods} entries")
        return np.diag(cov)
    if cov.shape != (periods, periods):
        raise DataValidationError(f"covariance must be {periods}x{periods}")
    return cov


def sample_load_noise(covariances: Sequence, n_scenarios: int, seed: int, periods: int) -> LoadNoiseSet:
    """
    Scenarios of the aggregate load noise, the sum of independent building noises.

    Args:
        covariances: Per building a scalar variance, a diagonal or a full T x T matrix
        n_scenarios: Number of draws
        seed: Seed of the draws
        periods: Horizon T

    Raises:
        DataValidationError: If a covariance is not symmetric positive semidefinite
    """
    if n_scenarios < 1:
        raise DataValidationError("at least one load-noise scenario required")
    total = np.zeros((periods, periods))
    for i, spec in enumerate(covariances):
        cov = _covariance(spec, periods)
        if not np.allclose(cov, cov.T, atol=1e-12):
            raise DataValidationError(f"load-noise covariance of building {i + 1} is not symmetric")
        eig = np.linalg.eigvalsh(cov)
        if eig[0] < -PSD_TOLERANCE * max(1.0, float(np.abs(eig).max())):
            raise DataValidationError(f"load-noise covariance of building {i + 1} is not positive semidefinite")
        total += cov
    values, vectors = np.linalg.eigh(total)
    factor = vectors * np.sqrt(np.clip(values, 0.0, None))
    draws = np.random.default_rng(seed).standard_normal((n_scenarios, periods)) @ factor.T
    return LoadNoiseSet(
        scenarios_kw=tuple(map(tuple, draws.tolist())),
        covariance=tuple(map(tuple, total.tolist())),
    )


def noise_covariances(std_kw: Sequence[float], buildings: int) -> List[float]:
    """Per-building scalar variances; a single value applies to every building."""
    if len(std_kw) == 1:
        std_kw = list(std_kw) * buildings
    if len(std_kw) != buildings:
        raise DataValidationError(f"need 1 or {buildings} load-noise standard deviations, got {len(std_kw)}")
    return [float(s) ** 2 for s in std_kw]


class _Triplets:
    """COO assembly of a sparse constraint matrix."""

    def __init__(self):
        self.rows: List[np.ndarray] = []
        self.cols: List[np.ndarray] = []
        self.vals: List[np.ndarray] = []

    def block(self, row: int, col: int, dense: np.ndarray) -> None:
        r, c = np.nonzero(dense)
        self.rows.append(r + row)
        self.cols.append(c + col)
        self.vals.append(dense[r, c])

    def identity(self, row: int, col: int, size: int, value: float = 1.0) -> None:
        index = np.arange(size)
        self.rows.append(index + row)
        self.cols.append(index + col)
        self.vals.append(np.full(size, value))

    def matrix(self, n_rows: int, n_cols: int) -> sp.csr_matrix:
        if not self.rows:
            return sp.csr_matrix((n_rows, n_cols))
        return sp.coo_matrix(
            (np.concatenate(self.vals), (np.concatenate(self.rows), np.concatenate(self.cols))),
            shape=(n_rows, n_cols),
        ).tocsr()


def build_program(
    regions: Sequence[FeasibleRegion],
    tau: Sequence[float],
    v: float,
    wind: WindScenarioSet,
    noise: LoadNoiseSet,
    names: Optional[Sequence[str]] = None,
) -> StochasticProgram:
    """
    Assemble the aggregator's linear program.

    Objective: ``tau' p^b + sum_{w,b} prob_w prob_b v |p^b - p_{w,b} + Delta_w|_1``
    with the absolute value linearized by auxiliary variables. The aggregate
    base and scenario loads are tied to the building loads by equality rows;
    every building load lies in its region.

    Raises:
        DataValidationError: On inconsistent horizons or empty inputs
    """
    if not regions:
        raise DataValidationError("at least one building region required")
    T = regions[0].periods
    if any(r.periods != T for r in regions):
        raise DataValidationError("all regions must share the horizon")
    if wind.periods != T or noise.matrix().shape[1] != T:
        raise DataValidationError(f"scenario horizons must equal the region horizon {T}")
    if v < 0:
        raise DataValidationError("balancing compensation v must be >= 0")
    names = tuple(names) if names is not None else tuple(f"building_{i + 1}" for i in range(len(regions)))
    tau = tau_series(tau, T)

    N, W, B = len(regions), len(wind.generation_kwh), len(noise.scenarios_kw)
    layout = ProgramLayout(buildings=N, periods=T, wind_scenarios=W, noise_scenarios=B)
    n = layout.n_vars
    delta = deviations_kw(wind)
    eps = noise.matrix()
    weights = np.outer(np.asarray(wind.probabilities), noise.probabilities)

    q = np.zeros(n)
    q[layout.base_total_slice()] = tau
    for w in range(W):
        for b in range(B):
            q[layout.aux_slice(w, b)] = weights[w, b] * v

    eq = _Triplets()
    b_eq = [np.zeros(T)]
    eq.identity(0, layout.base_total, T)
    for i in range(N):
        eq.identity(0, layout.base_slice(i).start, T, -1.0)
    row = T
    for w in range(W):
        for b in range(B):
            eq.identity(row, layout.scenario_total_slice(w, b).start, T)
            for i in range(N):
                eq.identity(row, layout.recourse_slice(i, w).start, T, -1.0)
            b_eq.append(eps[b])
            row += T
    A_eq = eq.matrix(row, n)

    ub = _Triplets()
    b_ub = []
    row = 0
    for w in range(W):
        for b in range(B):
            total, aux = layout.scenario_total_slice(w, b).start, layout.aux_slice(w, b).start
            # p^b - p_wb - s <= -Delta_w
            ub.identity(row, layout.base_total, T)
            ub.identity(row, total, T, -1.0)
            ub.identity(row, aux, T, -1.0)
            b_ub.append(-delta[w])
            row += T
            # -p^b + p_wb - s <= Delta_w
            ub.identity(row, layout.base_total, T, -1.0)
            ub.identity(row, total, T)
            ub.identity(row, aux, T, -1.0)
            b_ub.append(delta[w])
            row += T
    for i, region in enumerate(regions):
        G, h = region_service.export_constraints(region)
        for start in [layout.base_slice(i).start] + [layout.recourse_slice(i, w).start for w in range(W)]:
            ub.block(row, start, G)
            b_ub.append(h)
            row += G.shape[0]
    A_ub = ub.matrix(row, n)

    lb = np.full(n, -np.inf)
    lb[layout.aux :] = 0.0
    program = ConvexProgram(
        q=q,
        A_ub=A_ub,
        b_ub=np.concatenate(b_ub),
        A_eq=A_eq,
        b_eq=np.concatenate(b_eq),
        lb=lb,
    )
    logger.debug("Built scheduling LP: %d variables, %d inequality and %d equality rows", n, A_ub.shape[0], A_eq.shape[0])
    return StochasticProgram(
        program=program,
        layout=layout,
        names=names,
        regions=tuple(regions),
        tau=tau,
        v=float(v),
        wind=wind,
        noise=noise,
    )


def residuals_kw(base_total: np.ndarray, recourse: np.ndarray, wind: WindScenarioSet, noise: LoadNoiseSet) -> np.ndarray:
    """
    Balancing residuals ``p^b - p_{w,b} + Delta_w``, (W, B, T).

    ``recourse`` is the aggregate recourse load per wind scenario, (W, T).
    """
    scenario_total = recourse[:, None, :] + noise.matrix()[None, :, :]
    return base_total[None, None, :] - scenario_total + deviations_kw(wind)[:, None, :]


def _expected_l1(values: np.ndarray, wind: WindScenarioSet, noise: LoadNoiseSet) -> float:
    weights = np.outer(np.asarray(wind.probabilities), noise.probabilities)
    return float(np.sum(weights * np.abs(values).sum(axis=2)))


def solve_program(problem: StochasticProgram, tolerance: float = solver_service.DEFAULT_TOLERANCE) -> Schedule:
    """
    Solve the aggregator LP and unpack the schedule.

    The reported objective is recomputed from the loads as energy cost plus
    expected balancing cost.

    Raises:
        InfeasibleProgramError: If no schedule satisfies every region
        UnboundedProgramError: If the LP is unbounded
        SolverError: On solver failure or a returned load outside its region
    """
    result = solver_service.solve(problem.program, tolerance)
    if result.status == solver_service.INFEASIBLE:
        raise InfeasibleProgramError("scheduling LP is infeasible: building regions admit no joint schedule")
    if result.status == solver_service.UNBOUNDED:
        raise UnboundedProgramError("scheduling LP is unbounded")
    solver_service.require_optimal(result, "scheduling LP")
    x = result.x
    layout = problem.layout

    buildings = []
    recourse_total = np.zeros((layout.wind_scenarios, layout.periods))
    for i, (name, region) in enumerate(zip(problem.names, problem.regions)):
        base = x[layout.base_slice(i)]
        recourse = np.vstack([x[layout.recourse_slice(i, w)] for w in range(layout.wind_scenarios)])
        for label, profile in [("base", base)] + [(f"wind scenario {w + 1}", recourse[w]) for w in range(layout.wind_scenarios)]:
            membership = region_service.contains(region, profile, MEMBERSHIP_TOLERANCE)
            if not membership.contained:
                raise SolverError(f"{name}: {label} load violates {membership.violated[:3]}")
        recourse_total += recourse
        buildings.append(
            BuildingSchedule(
                name=name,
                base_load_kw=tuple(base.tolist()),
                scenario_load_kw=tuple(map(tuple, recourse.tolist())),
            )
        )

    base_total = sum(np.asarray(b.base_load_kw) for b in buildings)
    energy = float(problem.tau @ base_total)
    balancing = problem.v * _expected_l1(residuals_kw(base_total, recourse_total, problem.wind, problem.noise), problem.wind, problem.noise)
    if abs(energy + balancing - result.objective) > 1e-6 * max(1.0, abs(result.objective)):
        logger.warning("objective decomposition differs from solver objective by %.3e", energy + balancing - result.objective)
    return Schedule(
        status=result.status,
        tau=tuple(problem.tau.tolist()),
        v=problem.v,
        buildings=tuple(buildings),
        aggregate_base_kw=tuple(base_total.tolist()),
        objective=energy + balancing,
        energy_cost=energy,
        balancing_cost=balancing,
    )


def schedule_residuals(schedule: Schedule, wind: WindScenarioSet, noise: LoadNoiseSet) -> np.ndarray:
    recourse_total = sum(np.asarray(b.scenario_load_kw) for b in schedule.buildings)
    return residuals_kw(np.asarray(schedule.aggregate_base_kw), recourse_total, wind, noise)


def mitigation_metric(schedule: Schedule, wind: WindScenarioSet, noise: LoadNoiseSet) -> float:
    """
    Share of the expected wind forecast error absorbed by the buildings.

    ``1 - E|p^b - p_{w,b} + Delta_w|_1 / E|Delta_w|_1``.

    Raises:
        DataValidationError: If the wind scenarios have no deviation
    """
    delta = deviations_kw(wind)
    expected_delta = float(np.asarray(wind.probabilities) @ np.abs(delta).sum(axis=1))
    if expected_delta <= 0.0:
        raise DataValidationError("wind scenarios have no forecast error to mitigate")
    return 1.0 - _expected_l1(schedule_residuals(schedule, wind, noise), wind, noise) / expected_delta


def violation_metric(schedule: Schedule, days: Sequence[BuildingDay], wind: WindScenarioSet) -> Dict[str, float]:
    """
    Expected comfort violation (degC*h) of each building executing its scenario loads.

    Loads are clamped to ``[base, base + HVAC capacity]`` of the plant before
    simulation.
    """
    by_name = {day.name: day for day in days}
    probabilities = np.asarray(wind.probabilities)
    violations = {}
    for building in schedule.buildings:
        day = by_name[building.name]
        base = np.asarray(day.conditions.base_load_kw)
        expected = 0.0
        for w, load in enumerate(np.asarray(building.scenario_load_kw)):
            clamped = np.clip(load, base, base + day.plant.hvac_capacity_kw)
            if np.any(np.abs(clamped - load) > MEMBERSHIP_TOLERANCE):
                logger.warning("%s: scheduled load outside plant limits in wind scenario %d; clamped", building.name, w + 1)
            result = plant_service.check_feasible(day.plant, day.initial_state, clamped, day.conditions)
            expected += probabilities[w] * result.violation_ch
        violations[building.name] = float(expected)
    return violations


def solve_timed(
    regions: Sequence[FeasibleRegion],
    tau: Sequence[float],
    v: float,
    wind: WindScenarioSet,
    noise: LoadNoiseSet,
    names: Optional[Sequence[str]] = None,
):
    """Build and solve, returning the schedule, the program and (build, solve) seconds."""
    start = time.perf_counter()
    problem = build_program(regions, tau, v, wind, noise, names)
    built = time.perf_counter()
    schedule = solve_program(problem)
    return schedule, problem, built - start, time.perf_counter() - built


def sweep_compensation(
    regions: Sequence[FeasibleRegion],
    names: Sequence[str],
    tau: Sequence[float],
    v_grid: Sequence[float],
    wind: WindScenarioSet,
    noise: LoadNoiseSet,
) -> List[Dict]:
    """One row per compensation level: costs and mitigation."""
    rows = []
    for v in sorted(v_grid):
        schedule = solve_program(build_program(regions, tau, v, wind, noise, names))
        mitigation = mitigation_metric(schedule, wind, noise)
        rows.append(
            {
                "sweep": "v",
                "v": float(v),
                "objective": schedule.objective,
                "energy_cost": schedule.energy_cost,
                "balancing_cost": schedule.balancing_cost,
                "mitigation": mitigation,
            }
        )
        logger.info("v=%g: mitigation %.3f", v, mitigation)
    return rows


def sweep_robustness(
    days_by_alpha: Dict[float, Sequence[BuildingDay]],
    tau: Sequence[float],
    v: float,
    wind: WindScenarioSet,
    noise: LoadNoiseSet,
) -> List[Dict]:
    """
    One row per robustness level: mitigation and expected comfort violation.

    ``days_by_alpha`` maps alpha to the buildings' days with regions built
    for that alpha.
    """
    rows = []
    for alpha in sorted(days_by_alpha):
        days = days_by_alpha[alpha]
        schedule = solve_program(build_program([d.region for d in days], tau, v, wind, noise, [d.name for d in days]))
        violations = violation_metric(schedule, days, wind)
        row = {
            "sweep": "alpha",
            "alpha": float(alpha),
            "v": float(v),
            "objective": schedule.objective,
            "mitigation": mitigation_metric(schedule, wind, noise),
            "violation_ch": float(np.mean(list(violations.values()))),
        }
        row.update({f"violation_ch_{name}": value for name, value in violations.items()})
        rows.append(row)
        logger.info("alpha=%g: mitigation %.3f, violation %.3f degC*h", alpha, row["mitigation"], row["violation_ch"])
    return rows


def sweep_buildings(
    regions: Sequence[FeasibleRegion],
    counts: Sequence[int],
    tau: Sequence[float],
    v: float,
    wind: WindScenarioSet,
    noise: LoadNoiseSet,
) -> List[Dict]:
    """
    Build and solve times for growing building counts.

    Larger fleets reuse the given regions cyclically.
    """
    rows = []
    for N in sorted(counts):
        fleet = [regions[i % len(regions)] for i in range(N)]
        schedule, problem, build_s, solve_s = solve_timed(fleet, tau, v, wind, noise)
        rows.append(
            {
                "buildings": N,
                "variables": problem.layout.n_vars,
                "build_s": build_s,
                "solve_s": solve_s,
                "objective": schedule.objective,
            }
        )
        logger.info("N=%d: %d variables, solved in %.2f s", N, problem.layout.n_vars, solve_s)
    return rows
