"""
Synthetic multi-zone building used to generate data and to check
feasibility of commanded load profiles.

Zones exchange heat with the ambient and with their neighbours in a chain.
The network is discretized exactly per period (zero-order hold). HVAC thermal
output is ``COP(phi_out) * S * tanh(p_hvac / S)``, so neither the
temperature response to load nor the COP is affine.
"""
import logging
import zlib
from functools import lru_cache
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
import scipy.linalg

from errors import DataValidationError
from models import (
    DatasetRole,
    DayConditions,
    DayOfWeek,
    DayRecord,
    FeasibilityResult,
    PlantConfig,
    PlantState,
    TrainingDataset,
)

logger = logging.getLogger(__name__)

LOAD_TOLERANCE_KW = 1e-9
DAYLIGHT_START_H = 6.0
DAYLIGHT_END_H = 18.0


class ThermalPlant:
    """Discretized thermal network of one PlantConfig at a fixed period length."""

    def __init__(self, cfg: PlantConfig, periods: int):
        self.cfg = cfg
        self.periods = periods
        self.step_h = 24.0 / periods
        zones = cfg.zones
        capacitance = np.asarray(cfg.capacitance_kwh_per_c, dtype=float)
        ambient = np.asarray(cfg.ambient_conductance_kw_per_c, dtype=float)

        conductance = -np.diag(ambient)
        for z in range(zones - 1):
            g = cfg.inter_zone_conductance_kw_per_c
            conductance[z, z] -= g
            conductance[z + 1, z + 1] -= g
            conductance[z, z + 1] += g
            conductance[z + 1, z] += g
        A = conductance / capacitance[:, None]
        # inputs: [phi_out, heat into zone 1..Z]
        B = np.hstack([ambient[:, None], np.eye(zones)]) / capacitance[:, None]

        n_in = B.shape[1]
        augmented = np.zeros((zones + n_in, zones + n_in))
        augmented[:zones, :zones] = A
        augmented[:zones, zones:] = B
        discrete = scipy.linalg.expm(augmented * self.step_h)
        self.Ad = discrete[:zones, :zones]
        self.Bd_out = discrete[:zones, zones]
        self.Bd_heat = discrete[:zones, zones + 1 :]

        volume = np.asarray(cfg.zone_volume_m3, dtype=float)
        self.weights = volume / volume.sum()
        self.hvac_share = np.asarray(cfg.hvac_zone_share, dtype=float)
        self.gain_share = np.asarray(cfg.gain_zone_share, dtype=float)
        self.sign = cfg.mode.sign

    def average(self, x: np.ndarray) -> float:
        return float(self.weights @ x)

    def cop(self, outdoor_c: float) -> float:
        cfg = self.cfg
        delta = outdoor_c - cfg.cop_reference_c
        # cooling degrades as it gets hotter outside, heating as it gets colder
        factor = 1.0 + self.sign * cfg.cop_temp_slope * delta
        return cfg.hvac_cop * float(np.clip(factor, 0.5, 1.5))

    def thermal_output(self, hvac_kw: float, outdoor_c: float) -> float:
        s = self.cfg.saturation_kw
        return self.cop(outdoor_c) * s * float(np.tanh(hvac_kw / s))

    def max_thermal_output(self, outdoor_c: float) -> float:
        return self.thermal_output(self.cfg.hvac_capacity_kw, outdoor_c)

    def free_step(self, x: np.ndarray, outdoor_c: float, disturbance_kw: float) -> np.ndarray:
        """State after one period with the HVAC off."""
        return self.Ad @ x + self.Bd_out * outdoor_c + self.Bd_heat @ (self.gain_share * disturbance_kw)

    def hvac_response(self) -> np.ndarray:
        """State change per kW of HVAC thermal output."""
        return self.sign * (self.Bd_heat @ self.hvac_share)

    def step(self, x: np.ndarray, outdoor_c: float, disturbance_kw: float, hvac_kw: float) -> np.ndarray:
        return self.free_step(x, outdoor_c, disturbance_kw) + self.hvac_response() * self.thermal_output(
            hvac_kw, outdoor_c
        )

    def thermostat_power(self, x: np.ndarray, outdoor_c: float, disturbance_kw: float, setpoint_c: float) -> float:
        """Electric HVAC power that brings the zone average to the setpoint, within capacity."""
        free = self.average(self.free_step(x, outdoor_c, disturbance_kw))
        gain = float(self.weights @ self.hvac_response())
        if gain == 0.0:
            return 0.0
        needed = (setpoint_c - free) / gain
        if needed <= 0.0:
            return 0.0
        needed = min(needed, self.max_thermal_output(outdoor_c))
        s = self.cfg.saturation_kw
        ratio = needed / (self.cop(outdoor_c) * s)
        power = s * float(np.arctanh(min(ratio, 1.0 - 1e-15)))
        return float(np.clip(power, 0.0, self.cfg.hvac_capacity_kw))


@lru_cache(maxsize=32)
def get_plant(cfg: PlantConfig, periods: int) -> ThermalPlant:
    return ThermalPlant(cfg, periods)


def building_seed(seed: int, building: str) -> int:
    """Stable per-building seed derived from the run seed."""
    return (seed * 1_000_003 + zlib.crc32(building.encode("utf-8"))) % (2**32)


def disturbance_series(cfg: PlantConfig, conditions: DayConditions) -> np.ndarray:
    """Internal plus solar heat gains per period, kW."""
    return np.asarray(conditions.internal_gain_kw) + cfg.solar_gain_kw_per_wm2 * np.asarray(conditions.solar_wm2)


def draw_day_conditions(
    cfg: PlantConfig,
    day_of_week: DayOfWeek,
    rng: np.random.Generator,
    previous_mean: Optional[float],
    periods: int = 24,
) -> DayConditions:
    """
    Draw one day's weather and schedules.

    The daily mean outdoor temperature follows an AR(1) process around the
    configured mean; the diurnal shape is a cosine peaking at ``peak_hour``.
    Solar irradiation is a half-sine over daylight hours scaled by a random
    clearness index.
    """
    weather = cfg.weather
    if previous_mean is None:
        previous_mean = weather.mean_outdoor_c
    rho = weather.persistence
    mean = (
        weather.mean_outdoor_c
        + rho * (previous_mean - weather.mean_outdoor_c)
        + np.sqrt(1.0 - rho**2) * weather.mean_std_c * rng.standard_normal()
    )
    amplitude = max(0.0, weather.diurnal_amplitude_c + weather.amplitude_std_c * rng.standard_normal())
    clearness = rng.uniform(weather.min_clearness, 1.0)
    base_scale = max(0.0, 1.0 + cfg.base_load_jitter * rng.standard_normal())
    gain_scale = max(0.0, 1.0 + cfg.gain_jitter * rng.standard_normal())

    clock = (np.arange(1, periods + 1) - 0.5) * 24.0 / periods
    outdoor = mean + amplitude * np.cos(2.0 * np.pi * (clock - weather.peak_hour) / 24.0)
    daylight = np.clip((clock - DAYLIGHT_START_H) / (DAYLIGHT_END_H - DAYLIGHT_START_H), 0.0, 1.0)
    solar = weather.solar_peak_wm2 * clearness * np.sin(np.pi * daylight)
    solar = np.maximum(solar, 0.0)
    base = cfg.base_schedule(day_of_week).series(periods) * base_scale
    gains = cfg.gain_schedule(day_of_week).series(periods) * gain_scale

    return DayConditions(
        day_of_week=day_of_week,
        outdoor_temp_c=tuple(outdoor.tolist()),
        solar_wm2=tuple(solar.tolist()),
        base_load_kw=tuple(base.tolist()),
        internal_gain_kw=tuple(gains.tolist()),
    )


class ThermostatRun(NamedTuple):
    hvac_kw: np.ndarray
    states: np.ndarray  # (T + 1, zones), row 0 is x0
    average_c: np.ndarray  # (T,), noiseless zone average after each period


def run_thermostat(cfg: PlantConfig, conditions: DayConditions, x0: PlantState) -> ThermostatRun:
    """Closed-loop thermostat control of one day, noiseless."""
    periods = conditions.periods
    plant = get_plant(cfg, periods)
    _check_state(cfg, x0)
    setpoints = cfg.setpoints(conditions.day_of_week, periods)
    disturbance = disturbance_series(cfg, conditions)
    x = np.asarray(x0.zone_temps_c, dtype=float)
    states = [x]
    hvac = np.zeros(periods)
    for t in range(periods):
        outdoor = conditions.outdoor_temp_c[t]
        hvac[t] = plant.thermostat_power(x, outdoor, disturbance[t], setpoints[t])
        x = plant.step(x, outdoor, disturbance[t], hvac[t])
        states.append(x)
    states = np.vstack(states)
    return ThermostatRun(hvac_kw=hvac, states=states, average_c=states[1:] @ plant.weights)


def simulate_thermostat_day(
    cfg: PlantConfig,
    conditions: DayConditions,
    x0: PlantState,
    seed: Optional[int] = None,
    day_id: int = 0,
    initial_reading_c: Optional[float] = None,
    noise: bool = True,
) -> DayRecord:
    """
    Simulate a thermostat-controlled day and record it as coarse data.

    Args:
        cfg: Plant configuration
        conditions: Weather, day type, base load and gains of the day
        x0: Zone temperatures at the start of the day
        seed: Seed of the measurement noise
        day_id: Identifier stored in the record
        initial_reading_c: Recorded initial temperature; defaults to the
            (noisy) zone average of ``x0``
        noise: Whether to add measurement noise to indoor readings

    Returns:
        DayRecord with load = base + HVAC and the volume-weighted indoor average
    """
    rng = np.random.default_rng(seed)
    return _record_day(cfg, conditions, x0, rng, day_id, initial_reading_c, noise)[0]


def _record_day(cfg, conditions, x0, rng, day_id, initial_reading_c, noise) -> Tuple[DayRecord, ThermostatRun]:
    run = run_thermostat(cfg, conditions, x0)
    plant = get_plant(cfg, conditions.periods)
    std = cfg.noise_std_c if noise else 0.0
    indoor = run.average_c + std * rng.standard_normal(conditions.periods)
    if initial_reading_c is None:
        initial_reading_c = plant.average(run.states[0]) + std * rng.standard_normal()
    load = np.asarray(conditions.base_load_kw) + run.hvac_kw
    record = DayRecord(
        day_id=day_id,
        day_of_week=conditions.day_of_week,
        initial_indoor_temp_c=float(initial_reading_c),
        load_kw=tuple(load.tolist()),
        indoor_temp_c=tuple(indoor.tolist()),
        outdoor_temp_c=conditions.outdoor_temp_c,
        solar_wm2=conditions.solar_wm2,
        hvac_kw=tuple(run.hvac_kw.tolist()),
    )
    return record, run


class PlantRun(NamedTuple):
    dataset: TrainingDataset
    conditions: List[DayConditions]
    initial_states: List[PlantState]
    final_state: PlantState
    final_mean_c: float


def generate_days(
    cfg: PlantConfig,
    n_days: int,
    seed: int,
    start_day_of_week: DayOfWeek = DayOfWeek.MON,
    periods: int = 24,
    initial_temp_c: Optional[float] = None,
    noise: bool = True,
) -> PlantRun:
    """
    Simulate consecutive days; each day starts from the previous day's final state.

    The recorded initial temperature of a day is the previous day's last
    indoor reading.
    """
    rng = np.random.default_rng(seed)
    if initial_temp_c is None:
        initial_temp_c = cfg.setback_setpoint_c
    state = PlantState.uniform(initial_temp_c, cfg.zones)
    previous_mean = None
    reading = None
    days, conditions, states = [], [], []
    for k in range(n_days):
        dow = start_day_of_week.shift(k)
        cond = draw_day_conditions(cfg, dow, rng, previous_mean, periods)
        record, run = _record_day(cfg, cond, state, rng, k + 1, reading, noise)
        days.append(record)
        conditions.append(cond)
        states.append(state)
        state = PlantState(zone_temps_c=tuple(run.states[-1].tolist()))
        previous_mean = float(np.mean(cond.outdoor_temp_c))
        reading = record.indoor_temp_c[-1]
    logger.info("Simulated %d days of %s", n_days, cfg.name)
    dataset = TrainingDataset(days=tuple(days), periods=periods, role=DatasetRole.TRAIN)
    return PlantRun(dataset, conditions, states, state, previous_mean if previous_mean is not None else cfg.weather.mean_outdoor_c)


def _check_state(cfg: PlantConfig, x0: PlantState) -> None:
    if len(x0.zone_temps_c) != cfg.zones:
        raise DataValidationError(f"plant state has {len(x0.zone_temps_c)} zones, expected {cfg.zones}")


def hvac_from_load(cfg: PlantConfig, conditions: DayConditions, load_kw) -> np.ndarray:
    """
    HVAC power implied by a total load profile, clamped to capacity.

    Raises:
        DataValidationError: If the load is below the base load at any period
    """
    load = np.asarray(load_kw, dtype=float)
    if load.shape != (conditions.periods,):
        raise DataValidationError(f"load profile must have {conditions.periods} periods")
    hvac = load - np.asarray(conditions.base_load_kw)
    below = np.flatnonzero(hvac < -LOAD_TOLERANCE_KW)
    if below.size:
        t = int(below[0]) + 1
        raise DataValidationError(f"load below base load at period {t}")
    over = hvac > cfg.hvac_capacity_kw
    if over.any():
        logger.debug("HVAC power above capacity in %d periods; clamped", int(over.sum()))
    return np.clip(hvac, 0.0, cfg.hvac_capacity_kw)


def evaluate_temperature(cfg: PlantConfig, x0: PlantState, load_kw, conditions: DayConditions) -> np.ndarray:
    """Open-loop, noiseless zone-average temperature for a commanded load profile."""
    _check_state(cfg, x0)
    hvac = hvac_from_load(cfg, conditions, load_kw)
    plant = get_plant(cfg, conditions.periods)
    disturbance = disturbance_series(cfg, conditions)
    x = np.asarray(x0.zone_temps_c, dtype=float)
    trajectory = np.zeros(conditions.periods)
    for t in range(conditions.periods):
        x = plant.step(x, conditions.outdoor_temp_c[t], disturbance[t], hvac[t])
        trajectory[t] = plant.average(x)
    return trajectory


def comfort_violation(cfg: PlantConfig, trajectory) -> float:
    trajectory = np.asarray(trajectory, dtype=float)
    above = np.maximum(trajectory - cfg.comfort_max_c, 0.0)
    below = np.maximum(cfg.comfort_min_c - trajectory, 0.0)
    return float(np.sum(above + below) * 24.0 / trajectory.size)


def check_feasible(cfg: PlantConfig, x0: PlantState, load_kw, conditions: DayConditions) -> FeasibilityResult:
    """
    Check a load profile against load limits and the comfort band.

    Violation is the comfort-band exceedance integrated over the day, degC*h.
    """
    load = np.asarray(load_kw, dtype=float)
    trajectory = evaluate_temperature(cfg, x0, load, conditions)
    violation = comfort_violation(cfg, trajectory)
    within_limits = bool(
        np.all(load - np.asarray(conditions.base_load_kw) <= cfg.hvac_capacity_kw + LOAD_TOLERANCE_KW)
    )
    return FeasibilityResult(feasible=within_limits and violation == 0.0, violation_ch=violation)
