"""
Pydantic models for building data, plant configuration, learned region
parameters, scheduling artifacts and run configuration.
"""
from enum import Enum
from typing import Any, Dict, List, NamedTuple, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

SCHEMA_VERSION = 1

TEMP_SANITY_MIN_C = -60.0
TEMP_SANITY_MAX_C = 80.0


class DayOfWeek(str, Enum):
    MON = "mon"
    TUE = "tue"
    WED = "wed"
    THU = "thu"
    FRI = "fri"
    SAT = "sat"
    SUN = "sun"

    @property
    def is_weekend(self) -> bool:
        return self in (DayOfWeek.SAT, DayOfWeek.SUN)

    def shift(self, days: int) -> "DayOfWeek":
        members = list(DayOfWeek)
        return members[(members.index(self) + days) % 7]


class DatasetRole(str, Enum):
    TRAIN = "train"
    CROSS_VALIDATION = "cross_validation"
    TEST = "test"


class ThermalMode(str, Enum):
    """Cooling: more load means lower temperature, so load coefficients are <= 0."""

    COOLING = "cooling"
    HEATING = "heating"

    @property
    def sign(self) -> float:
        return -1.0 if self is ThermalMode.COOLING else 1.0


class HvacSource(str, Enum):
    TRUE_HVAC = "true_hvac"
    TOTAL_MINUS_BASE_ESTIMATE = "total_minus_base_estimate"


# ---------------------------------------------------------------------------
# Building data
# ---------------------------------------------------------------------------


class ExplanatoryRecord(BaseModel):
    """Explanatory variables of one day and period, used to pick a cluster."""

    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    day_of_week: DayOfWeek
    outdoor_temp_c: float = Field(..., description="Outdoor temperature during the period")
    daily_mean_outdoor_c: float = Field(..., description="Mean outdoor temperature of the day")
    solar_wm2: float = Field(..., description="Solar irradiation during the period")
    extra: Dict[str, float] = Field(default_factory=dict, description="Additional numeric features")

    def numeric(self, name: str) -> float:
        if name in ("outdoor_temp_c", "daily_mean_outdoor_c", "solar_wm2"):
            return getattr(self, name)
        return self.extra[name]


class DayRecord(BaseModel):
    """Hourly coarse data of one day; indoor temperature is the zone average."""

    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    day_id: int
    day_of_week: DayOfWeek
    initial_indoor_temp_c: float
    load_kw: Tuple[float, ...]
    indoor_temp_c: Tuple[float, ...]
    outdoor_temp_c: Tuple[float, ...]
    solar_wm2: Tuple[float, ...]
    hvac_kw: Optional[Tuple[float, ...]] = None
    extra: Dict[str, Tuple[float, ...]] = Field(default_factory=dict)

    @model_validator(mode="after")
    def check_series(self) -> "DayRecord":
        n = len(self.load_kw)
        if n < 1:
            raise ValueError("a day needs at least one period")
        series = {
            "indoor_temp_c": self.indoor_temp_c,
            "outdoor_temp_c": self.outdoor_temp_c,
            "solar_wm2": self.solar_wm2,
        }
        if self.hvac_kw is not None:
            series["hvac_kw"] = self.hvac_kw
        for name, values in self.extra.items():
            series[name] = values
        for name, values in series.items():
            if len(values) != n:
                raise ValueError(f"{name} has {len(values)} periods, load has {n}")
        if any(v < 0 for v in self.load_kw):
            raise ValueError("loads must be >= 0")
        temps = (self.initial_indoor_temp_c,) + self.indoor_temp_c + self.outdoor_temp_c
        if any(t < TEMP_SANITY_MIN_C or t > TEMP_SANITY_MAX_C for t in temps):
            raise ValueError(
                f"temperature outside sanity bounds [{TEMP_SANITY_MIN_C}, {TEMP_SANITY_MAX_C}]"
            )
        return self

    @property
    def periods(self) -> int:
        return len(self.load_kw)

    @property
    def daily_mean_outdoor_c(self) -> float:
        return float(np.mean(self.outdoor_temp_c))

    def explanatory(self, t: int) -> ExplanatoryRecord:
        """Explanatory record for 1-based period ``t``."""
        return ExplanatoryRecord(
            day_of_week=self.day_of_week,
            outdoor_temp_c=self.outdoor_temp_c[t - 1],
            daily_mean_outdoor_c=self.daily_mean_outdoor_c,
            solar_wm2=self.solar_wm2[t - 1],
            extra={name: values[t - 1] for name, values in self.extra.items()},
        )

    def explanatory_series(self) -> List[ExplanatoryRecord]:
        return [self.explanatory(t) for t in range(1, self.periods + 1)]


class DayArrays(NamedTuple):
    """Column-aligned numpy views of a dataset (row k = k-th day)."""

    day_ids: np.ndarray
    loads: np.ndarray
    indoor: np.ndarray
    outdoor: np.ndarray
    initial: np.ndarray


class TrainingDataset(BaseModel):
    model_config = ConfigDict(frozen=True)

    days: Tuple[DayRecord, ...] = ()
    periods: int = Field(24, ge=1, description="Periods per day (T)")
    role: DatasetRole = DatasetRole.TRAIN

    @model_validator(mode="after")
    def check_days(self) -> "TrainingDataset":
        seen = set()
        for day in self.days:
            if day.periods != self.periods:
                raise ValueError(f"day {day.day_id} has {day.periods} periods, expected {self.periods}")
            if day.day_id in seen:
                raise ValueError(f"duplicate day id {day.day_id}")
            seen.add(day.day_id)
        return self

    @property
    def size(self) -> int:
        return len(self.days)

    @property
    def day_ids(self) -> List[int]:
        return [day.day_id for day in self.days]

    def day(self, day_id: int) -> DayRecord:
        for day in self.days:
            if day.day_id == day_id:
                return day
        raise KeyError(day_id)

    def subset(self, day_ids, role: Optional[DatasetRole] = None) -> "TrainingDataset":
        wanted = set(day_ids)
        return TrainingDataset(
            days=tuple(day for day in self.days if day.day_id in wanted),
            periods=self.periods,
            role=role or self.role,
        )

    def arrays(self) -> DayArrays:
        if not self.days:
            empty = np.zeros((0, self.periods))
            return DayArrays(np.zeros(0, dtype=int), empty, empty, empty, np.zeros(0))
        return DayArrays(
            day_ids=np.array([d.day_id for d in self.days], dtype=int),
            loads=np.array([d.load_kw for d in self.days], dtype=float),
            indoor=np.array([d.indoor_temp_c for d in self.days], dtype=float),
            outdoor=np.array([d.outdoor_temp_c for d in self.days], dtype=float),
            initial=np.array([d.initial_indoor_temp_c for d in self.days], dtype=float),
        )


# ---------------------------------------------------------------------------
# Synthetic plant
# ---------------------------------------------------------------------------


class LoadSchedule(BaseModel):
    """Two-level daily profile: ``day_kw`` between the open and close hours."""

    model_config = ConfigDict(frozen=True)

    night_kw: float = Field(..., ge=0)
    day_kw: float = Field(..., ge=0)
    open_hour: float = Field(7.0, ge=0, le=24)
    close_hour: float = Field(19.0, ge=0, le=24)

    def is_open(self, periods: int) -> np.ndarray:
        clock = (np.arange(1, periods + 1) - 0.5) * 24.0 / periods
        return (clock >= self.open_hour) & (clock < self.close_hour)

    def series(self, periods: int) -> np.ndarray:
        return np.where(self.is_open(periods), self.day_kw, self.night_kw)


class WeatherConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    mean_outdoor_c: float = 24.0
    mean_std_c: float = Field(3.0, ge=0)
    persistence: float = Field(0.7, ge=0, lt=1)
    diurnal_amplitude_c: float = Field(5.0, ge=0)
    amplitude_std_c: float = Field(1.0, ge=0)
    peak_hour: float = 15.0
    solar_peak_wm2: float = Field(800.0, ge=0)
    min_clearness: float = Field(0.3, ge=0, le=1)


class PlantConfig(BaseModel):
    """Multi-zone RC building with a saturating, cooling-only (by default) HVAC."""

    model_config = ConfigDict(frozen=True)

    name: str = "office_1"
    zones: int = Field(3, ge=1)
    zone_volume_m3: Tuple[float, ...] = (450.0, 300.0, 250.0)
    capacitance_kwh_per_c: Tuple[float, ...] = (3.6, 2.5, 2.0)
    ambient_conductance_kw_per_c: Tuple[float, ...] = (0.30, 0.22, 0.18)
    inter_zone_conductance_kw_per_c: float = Field(0.6, ge=0)
    hvac_capacity_kw: float = Field(15.0, ge=0)
    hvac_cop: float = Field(3.0, gt=0)
    cop_temp_slope: float = Field(0.02, ge=0, description="Relative COP loss per degC above reference")
    cop_reference_c: float = 25.0
    saturation_kw: float = Field(14.0, gt=0, description="Scale of the tanh HVAC saturation")
    hvac_zone_share: Tuple[float, ...] = (0.45, 0.30, 0.25)
    gain_zone_share: Tuple[float, ...] = (0.45, 0.30, 0.25)
    solar_gain_kw_per_wm2: float = Field(0.003, ge=0)
    weekday_base: LoadSchedule = LoadSchedule(night_kw=5.0, day_kw=14.0)
    weekend_base: LoadSchedule = LoadSchedule(night_kw=3.5, day_kw=4.5)
    weekday_gains: LoadSchedule = LoadSchedule(night_kw=1.0, day_kw=7.0)
    weekend_gains: LoadSchedule = LoadSchedule(night_kw=1.0, day_kw=1.5)
    occupied_setpoint_c: float = 23.0
    setback_setpoint_c: float = 25.5
    occupied_hours: Tuple[float, float] = (7.0, 19.0)
    weekend_occupied: bool = False
    comfort_min_c: float = 18.0
    comfort_max_c: float = 26.0
    base_load_jitter: float = Field(0.03, ge=0, description="Relative std of the daily base-load scale")
    gain_jitter: float = Field(0.10, ge=0)
    noise_std_c: float = Field(0.05, ge=0, description="Indoor temperature measurement noise")
    mode: ThermalMode = ThermalMode.COOLING
    weather: WeatherConfig = WeatherConfig()

    @model_validator(mode="after")
    def check_plant(self) -> "PlantConfig":
        for name in (
            "zone_volume_m3",
            "capacitance_kwh_per_c",
            "ambient_conductance_kw_per_c",
            "hvac_zone_share",
            "gain_zone_share",
        ):
            if len(getattr(self, name)) != self.zones:
                raise ValueError(f"{name} must have one entry per zone ({self.zones})")
        if any(c <= 0 for c in self.capacitance_kwh_per_c):
            raise ValueError("capacitances must be > 0")
        if any(v <= 0 for v in self.zone_volume_m3):
            raise ValueError("zone volumes must be > 0")
        if any(g < 0 for g in self.ambient_conductance_kw_per_c):
            raise ValueError("conductances must be >= 0")
        for name in ("hvac_zone_share", "gain_zone_share"):
            share = getattr(self, name)
            if any(s < 0 for s in share) or abs(sum(share) - 1.0) > 1e-9:
                raise ValueError(f"{name} must be non-negative and sum to 1")
        if not self.comfort_min_c < self.comfort_max_c:
            raise ValueError("comfort_min_c must be below comfort_max_c")
        return self

    def base_schedule(self, day_of_week: DayOfWeek) -> LoadSchedule:
        return self.weekend_base if day_of_week.is_weekend else self.weekday_base

    def gain_schedule(self, day_of_week: DayOfWeek) -> LoadSchedule:
        return self.weekend_gains if day_of_week.is_weekend else self.weekday_gains

    def setpoints(self, day_of_week: DayOfWeek, periods: int) -> np.ndarray:
        occupied = LoadSchedule(
            night_kw=0.0, day_kw=1.0, open_hour=self.occupied_hours[0], close_hour=self.occupied_hours[1]
        ).is_open(periods)
        if day_of_week.is_weekend and not self.weekend_occupied:
            occupied = np.zeros(periods, dtype=bool)
        return np.where(occupied, self.occupied_setpoint_c, self.setback_setpoint_c)

    @classmethod
    def preset(cls, name: str) -> "PlantConfig":
        if name not in PLANT_PRESETS:
            raise ValueError(f"unknown plant preset '{name}'")
        return cls(name=name, **PLANT_PRESETS[name])


# Sized after the reference buildings' peak/average load and thermal mass
# (thermal capacitance = electric thermal mass x COP).
PLANT_PRESETS: Dict[str, Dict[str, Any]] = {
    "office_1": {},
    "office_2": {
        "zone_volume_m3": (600.0, 400.0, 400.0),
        "capacitance_kwh_per_c": (10.0, 7.0, 6.1),
        "ambient_conductance_kw_per_c": (0.35, 0.25, 0.20),
        "inter_zone_conductance_kw_per_c": 1.0,
        "hvac_capacity_kw": 8.0,
        "saturation_kw": 8.0,
        "solar_gain_kw_per_wm2": 0.002,
        "weekday_base": LoadSchedule(night_kw=3.5, day_kw=7.5),
        "weekend_base": LoadSchedule(night_kw=2.5, day_kw=3.0),
        "weekday_gains": LoadSchedule(night_kw=1.0, day_kw=4.0),
        "weekend_gains": LoadSchedule(night_kw=1.0, day_kw=1.5),
    },
    "supermarket": {
        "zone_volume_m3": (3000.0, 2000.0, 1500.0),
        "capacitance_kwh_per_c": (105.0, 70.0, 56.0),
        "ambient_conductance_kw_per_c": (2.0, 1.5, 1.2),
        "inter_zone_conductance_kw_per_c": 6.0,
        "hvac_capacity_kw": 60.0,
        "hvac_cop": 3.2,
        "saturation_kw": 55.0,
        "solar_gain_kw_per_wm2": 0.01,
        "weekday_base": LoadSchedule(night_kw=70.0, day_kw=92.0, open_hour=7.0, close_hour=22.0),
        "weekend_base": LoadSchedule(night_kw=70.0, day_kw=92.0, open_hour=7.0, close_hour=22.0),
        "weekday_gains": LoadSchedule(night_kw=10.0, day_kw=25.0, open_hour=7.0, close_hour=22.0),
        "weekend_gains": LoadSchedule(night_kw=10.0, day_kw=25.0, open_hour=7.0, close_hour=22.0),
        "occupied_hours": (7.0, 22.0),
        "weekend_occupied": True,
    },
}


class PlantState(BaseModel):
    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    zone_temps_c: Tuple[float, ...]

    @classmethod
    def uniform(cls, temp_c: float, zones: int) -> "PlantState":
        return cls(zone_temps_c=(temp_c,) * zones)


class DayConditions(BaseModel):
    """Exogenous realization of a day: weather, day type, base load and gains."""

    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    day_of_week: DayOfWeek
    outdoor_temp_c: Tuple[float, ...]
    solar_wm2: Tuple[float, ...]
    base_load_kw: Tuple[float, ...]
    internal_gain_kw: Tuple[float, ...]

    @model_validator(mode="after")
    def check_lengths(self) -> "DayConditions":
        n = len(self.outdoor_temp_c)
        for name in ("solar_wm2", "base_load_kw", "internal_gain_kw"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} length differs from outdoor_temp_c")
        return self

    @property
    def periods(self) -> int:
        return len(self.outdoor_temp_c)


class FeasibilityResult(BaseModel):
    feasible: bool
    violation_ch: float = Field(..., description="Total comfort-band exceedance in degC*h")


# ---------------------------------------------------------------------------
# Clustering, bands, regions, selector
# ---------------------------------------------------------------------------


class ClusterModel(BaseModel):
    """Partition of the training days at period ``t`` (labels are 1-based)."""

    model_config = ConfigDict(frozen=True)

    t: int = Field(..., ge=1)
    n_clusters: int = Field(..., ge=1)
    centroids: Tuple[Tuple[float, ...], ...]
    day_ids: Tuple[int, ...]
    labels: Tuple[int, ...]
    row_mean: Tuple[float, ...]
    row_scale: Tuple[float, ...]
    degenerate_rows: Tuple[bool, ...]
    sse: float

    @model_validator(mode="after")
    def check_partition(self) -> "ClusterModel":
        if len(self.day_ids) != len(self.labels):
            raise ValueError("one label per day required")
        if any(not 1 <= c <= self.n_clusters for c in self.labels):
            raise ValueError("labels must lie in 1..n_clusters")
        if len(self.centroids) != self.n_clusters:
            raise ValueError("one centroid per cluster required")
        return self

    def members(self, c: int) -> List[int]:
        return [d for d, label in zip(self.day_ids, self.labels) if label == c]

    @property
    def assignments(self) -> List[List[int]]:
        return [self.members(c) for c in range(1, self.n_clusters + 1)]


class BandParameters(BaseModel):
    """Affine upper/lower indoor temperature estimates at period ``t``.

    Context coefficients multiply ``[phi_0_in, phi_t_out, 1]``.
    """

    model_config = ConfigDict(frozen=True)

    t: int = Field(..., ge=1)
    upper_load_coef: Tuple[float, ...]
    lower_load_coef: Tuple[float, ...]
    upper_context_coef: Tuple[float, float, float]
    lower_context_coef: Tuple[float, float, float]
    mode: ThermalMode = ThermalMode.COOLING
    beta: float = Field(0.0, ge=0, le=1)
    pi_out: float = 0.0
    area: float = Field(0.0, description="Summed band widths over the training points (J^A)")
    sse: float = 0.0
    alpha_unmet: bool = False

    @model_validator(mode="after")
    def check_lengths(self) -> "BandParameters":
        if len(self.upper_load_coef) != self.t or len(self.lower_load_coef) != self.t:
            raise ValueError(f"load coefficient vectors must have length t={self.t}")
        return self


class BlseSweepRecord(BaseModel):
    """One beta of the grid; band and metrics are None when the QP did not solve."""

    model_config = ConfigDict(frozen=True)

    beta: float
    band: Optional[BandParameters] = None
    sse: Optional[float] = None
    area: Optional[float] = None
    pi_out: Optional[float] = None
    status: str = "optimal"

    @property
    def solved(self) -> bool:
        return self.band is not None


class BlseFitReport(BaseModel):
    """Every beta of the grid with its fit, plus the selected index."""

    model_config = ConfigDict(frozen=True)

    records: Tuple[BlseSweepRecord, ...]
    selected_index: int
    alpha: float
    alpha_unmet: bool = False

    @property
    def selected(self) -> BlseSweepRecord:
        return self.records[self.selected_index]


class RegionParameters(BaseModel):
    """Phi_{c,t}: load limits, temperature limits and the band of one cluster."""

    model_config = ConfigDict(frozen=True)

    cluster: int = Field(1, ge=1)
    t: int = Field(..., ge=1)
    p_min_kw: float
    p_max_kw: float
    theta_min_c: float
    theta_max_c: float
    band: BandParameters
    sweep: Optional[BlseFitReport] = None

    @model_validator(mode="after")
    def check_limits(self) -> "RegionParameters":
        if self.p_min_kw > self.p_max_kw:
            raise ValueError("p_min_kw must not exceed p_max_kw")
        if self.theta_min_c > self.theta_max_c:
            raise ValueError("theta_min_c must not exceed theta_max_c")
        if self.band.t != self.t:
            raise ValueError("band period differs from region period")
        return self


class FeasibleRegion(BaseModel):
    """Polyhedral approximation of the feasible load profiles for one day."""

    model_config = ConfigDict(frozen=True)

    periods: int = Field(..., ge=1)
    parameters: Tuple[RegionParameters, ...]
    initial_indoor_temp_c: float
    outdoor_temp_c: Tuple[float, ...]
    band_ordering: bool = True

    @model_validator(mode="after")
    def check_periods(self) -> "FeasibleRegion":
        if len(self.parameters) != self.periods or len(self.outdoor_temp_c) != self.periods:
            raise ValueError("one parameter set and one outdoor temperature per period required")
        for index, phi in enumerate(self.parameters, start=1):
            if phi.t != index:
                raise ValueError(f"parameters out of order at period {index}")
        return self


class TreeNode(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: str = Field(..., description="'numeric', 'categorical' or 'leaf'")
    feature: Optional[str] = None
    threshold: Optional[float] = None
    categories: Tuple[str, ...] = ()
    left: int = -1
    right: int = -1
    label: Optional[int] = None
    n_samples: int = 0


class TreeParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    max_depth: int = Field(6, ge=0)
    min_leaf: int = Field(5, ge=1)


class SelectorTree(BaseModel):
    """Classification tree mapping explanatory variables to a cluster index.

    Numeric nodes send ``value <= threshold`` left; categorical nodes send
    members of ``categories`` right.
    """

    model_config = ConfigDict(frozen=True)

    t: int = Field(..., ge=1)
    nodes: Tuple[TreeNode, ...]
    classes: Tuple[int, ...]
    training_accuracy: float


class PeriodModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    t: int
    clusters: ClusterModel
    regions: Tuple[RegionParameters, ...]
    tree: SelectorTree


class ClusterSelectionReport(BaseModel):
    """Cross-validation curve over candidate cluster counts."""

    model_config = ConfigDict(frozen=True)

    candidates: Tuple[int, ...]
    cv_rmse: Tuple[float, ...]
    cv_rmse_per_period: Tuple[Tuple[float, ...], ...]
    cv_out_of_band: Tuple[float, ...]
    tree_accuracy: Tuple[float, ...]
    selected: int
    selected_per_period: Tuple[int, ...]


class ModelBundle(BaseModel):
    """Everything needed to instantiate a building's region for a new day."""

    model_config = ConfigDict(frozen=True)

    schema_version: int = SCHEMA_VERSION
    building: str
    periods: int
    mode: ThermalMode
    alpha: float
    beta_grid_size: int
    shared_beta: bool = False
    seed: int
    feature_schema: Tuple[str, ...]
    period_models: Tuple[PeriodModel, ...]
    selection: Optional[ClusterSelectionReport] = None


class RcParameters(BaseModel):
    """Per-step coefficients of the RC baseline; index t-1 predicts phi_{t+1} from period t."""

    model_config = ConfigDict(frozen=True)

    a: Tuple[float, ...] = Field(..., description="Coefficient on indoor-outdoor difference")
    b: Tuple[float, ...] = Field(..., description="Coefficient on HVAC power")
    d: Tuple[float, ...] = Field(..., description="Disturbance term")
    hvac_source: HvacSource = HvacSource.TOTAL_MINUS_BASE_ESTIMATE
    rank_deficient_periods: Tuple[int, ...] = ()

    @property
    def steps(self) -> int:
        return len(self.a)

    @property
    def periods(self) -> int:
        return len(self.a) + 1


class BaseLoadEstimate(BaseModel):
    """Minimum observed load per day type and period."""

    model_config = ConfigDict(frozen=True)

    weekday_kw: Tuple[float, ...]
    weekend_kw: Tuple[float, ...]

    def series(self, day_of_week: DayOfWeek) -> np.ndarray:
        return np.asarray(self.weekend_kw if day_of_week.is_weekend else self.weekday_kw)


# ---------------------------------------------------------------------------
# Scheduling
# ---------------------------------------------------------------------------


class WindScenarioSet(BaseModel):
    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    generation_kwh: Tuple[Tuple[float, ...], ...]
    probabilities: Tuple[float, ...]

    @model_validator(mode="after")
    def check_scenarios(self) -> "WindScenarioSet":
        if not self.generation_kwh:
            raise ValueError("at least one wind scenario required")
        if len(self.probabilities) != len(self.generation_kwh):
            raise ValueError("one probability per scenario required")
        if len({len(s) for s in self.generation_kwh}) != 1:
            raise ValueError("scenarios must share the horizon")
        if any(v < 0 for s in self.generation_kwh for v in s):
            raise ValueError("wind generation must be >= 0")
        if any(p < 0 for p in self.probabilities) or abs(sum(self.probabilities) - 1.0) > 1e-9:
            raise ValueError("probabilities must be non-negative and sum to 1")
        return self

    @classmethod
    def from_weights(cls, generation_kwh, weights=None) -> "WindScenarioSet":
        generation = np.asarray(generation_kwh, dtype=float)
        if weights is None:
            weights = np.ones(generation.shape[0])
        weights = np.asarray(weights, dtype=float)
        return cls(
            generation_kwh=tuple(map(tuple, generation.tolist())),
            probabilities=tuple((weights / weights.sum()).tolist()),
        )

    @property
    def periods(self) -> int:
        return len(self.generation_kwh[0])

    def matrix(self) -> np.ndarray:
        return np.asarray(self.generation_kwh, dtype=float)

    def mean(self) -> np.ndarray:
        return np.asarray(self.probabilities) @ self.matrix()

    def deviations(self) -> np.ndarray:
        return self.matrix() - self.mean()


class LoadNoiseSet(BaseModel):
    model_config = ConfigDict(frozen=True)

    scenarios_kw: Tuple[Tuple[float, ...], ...]
    covariance: Tuple[Tuple[float, ...], ...]

    def matrix(self) -> np.ndarray:
        return np.asarray(self.scenarios_kw, dtype=float)

    @property
    def probabilities(self) -> np.ndarray:
        n = len(self.scenarios_kw)
        return np.full(n, 1.0 / n)


class BuildingSchedule(BaseModel):
    name: str
    base_load_kw: Tuple[float, ...]
    scenario_load_kw: Tuple[Tuple[float, ...], ...]


class Schedule(BaseModel):
    status: str
    tau: Tuple[float, ...]
    v: float
    buildings: Tuple[BuildingSchedule, ...]
    aggregate_base_kw: Tuple[float, ...]
    objective: float
    energy_cost: float
    balancing_cost: float


class ScheduleReport(BaseModel):
    """Schedule of the target day with its metrics, as written by ``schedule``."""

    schema_version: int = SCHEMA_VERSION
    config_hash: str
    day_of_week: DayOfWeek
    alpha: float
    wind_capacity_kw: float
    wind_scenarios: int
    noise_scenarios: int
    clusters: Dict[str, Tuple[int, ...]] = Field(..., description="Tree-chosen cluster per period, per building")
    schedule: Schedule
    mitigation: float
    violation_ch: Dict[str, float]


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------


class PathsConfig(BaseModel):
    out_dir: str = "out"
    data_dir: Optional[str] = None
    bundle_dir: Optional[str] = None
    report_dir: Optional[str] = None
    wind_csv: Optional[str] = None

    def resolve(self, name: str) -> str:
        value = getattr(self, name)
        if value:
            return value
        sub = {"data_dir": "data", "bundle_dir": "bundles", "report_dir": "reports"}[name]
        return f"{self.out_dir}/{sub}"


class BuildingConfig(BaseModel):
    name: str
    preset: Optional[str] = None
    plant: Optional[PlantConfig] = None

    def plant_config(self) -> PlantConfig:
        if self.plant is not None:
            return self.plant
        return PlantConfig.preset(self.preset or self.name)


class DataConfig(BaseModel):
    periods: int = Field(24, ge=1)
    split: Tuple[int, int, int] = (300, 100, 100)
    start_day_of_week: DayOfWeek = DayOfWeek.MON
    write_true_hvac: bool = True


class TrainingConfig(BaseModel):
    cluster_candidates: Tuple[int, ...] = (1, 2, 3, 4)
    fixed_clusters: Optional[int] = Field(None, ge=1)
    per_period_clusters: bool = False
    alpha: float = Field(0.05, gt=0, lt=1)
    beta_grid_size: int = Field(100, ge=2)
    selection_beta_grid_size: int = Field(20, ge=2, description="Beta grid used while comparing cluster counts")
    kmeans_restarts: int = Field(10, ge=1)
    tree: TreeParams = TreeParams()
    shared_beta: bool = False
    store_sweeps: bool = True
    mode: ThermalMode = ThermalMode.COOLING
    extra_features: Tuple[str, ...] = ()


class ScheduleConfig(BaseModel):
    buildings: int = Field(3, ge=1, description="Number of buildings N")
    tau: Tuple[float, ...] = (1.0,)
    v: float = Field(2.0, ge=0, description="Nominal balancing compensation")
    v_grid: Tuple[float, ...] = (0.0, 0.5, 1.0, 2.0, 4.0, 8.0)
    alpha_grid: Tuple[float, ...] = (0.01, 0.05, 0.1, 0.3)
    wind_scenarios: int = Field(100, ge=1)
    noise_scenarios: int = Field(10, ge=1)
    wind_capacity_fraction: float = Field(1.0 / 3.0, gt=0)
    load_noise_std_kw: Tuple[float, ...] = (0.3,)
    target_day_of_week: DayOfWeek = DayOfWeek.WED
    timing_buildings: Tuple[int, ...] = (1, 2, 5, 10)


class RunConfig(BaseModel):
    """Top-level configuration of every command."""

    seed: int = 1
    paths: PathsConfig = PathsConfig()
    data: DataConfig = DataConfig()
    buildings: Tuple[BuildingConfig, ...] = (
        BuildingConfig(name="office_1"),
        BuildingConfig(name="office_2"),
        BuildingConfig(name="supermarket"),
    )
    training: TrainingConfig = TrainingConfig()
    schedule: ScheduleConfig = ScheduleConfig()

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "seed": 7,
                "paths": {"out_dir": "out"},
                "data": {"periods": 24, "split": [300, 100, 100]},
                "buildings": [{"name": "office_1"}],
                "training": {"alpha": 0.05, "beta_grid_size": 100},
                "schedule": {"v_grid": [0, 1, 2, 4], "alpha_grid": [0.01, 0.05, 0.1, 0.3]},
            }
        }
    )

    @field_validator("buildings")
    @classmethod
    def unique_names(cls, value):
        names = [b.name for b in value]
        if len(set(names)) != len(names):
            raise ValueError("building names must be unique")
        return value


# ---------------------------------------------------------------------------
# Convex programs
# ---------------------------------------------------------------------------


class ConvexProgram(BaseModel):
    """min 1/2 x'Px + q'x  s.t.  A_ub x <= b_ub, A_eq x = b_eq, lb <= x <= ub.

    ``P`` is None for a linear program. Matrices may be dense or scipy.sparse.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    q: np.ndarray
    P: Optional[Any] = None
    A_ub: Optional[Any] = None
    b_ub: Optional[np.ndarray] = None
    A_eq: Optional[Any] = None
    b_eq: Optional[np.ndarray] = None
    lb: Optional[np.ndarray] = None
    ub: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return int(self.q.shape[0])

    @property
    def is_linear(self) -> bool:
        return self.P is None

    def lower(self) -> np.ndarray:
        return np.full(self.n, -np.inf) if self.lb is None else np.asarray(self.lb, dtype=float)

    def upper(self) -> np.ndarray:
        return np.full(self.n, np.inf) if self.ub is None else np.asarray(self.ub, dtype=float)


class SolveResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    status: str = Field(..., description="optimal, infeasible, unbounded, max_iter, inaccurate or failed")
    x: Optional[np.ndarray] = None
    objective: Optional[float] = None
    residuals: Dict[str, float] = Field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class ProgramLayout(BaseModel):
    """Offsets of each variable block in the scheduling program."""

    model_config = ConfigDict(frozen=True)

    buildings: int
    periods: int
    wind_scenarios: int
    noise_scenarios: int

    @property
    def base_i(self) -> int:
        return 0

    @property
    def recourse_i(self) -> int:
        return self.buildings * self.periods

    @property
    def base_total(self) -> int:
        return self.recourse_i + self.buildings * self.wind_scenarios * self.periods

    @property
    def scenario_total(self) -> int:
        return self.base_total + self.periods

    @property
    def aux(self) -> int:
        return self.scenario_total + self.wind_scenarios * self.noise_scenarios * self.periods

    @property
    def n_vars(self) -> int:
        return self.aux + self.wind_scenarios * self.noise_scenarios * self.periods

    def base_slice(self, i: int) -> slice:
        start = self.base_i + i * self.periods
        return slice(start, start + self.periods)

    def recourse_slice(self, i: int, w: int) -> slice:
        start = self.recourse_i + (i * self.wind_scenarios + w) * self.periods
        return slice(start, start + self.periods)

    def base_total_slice(self) -> slice:
        return slice(self.base_total, self.base_total + self.periods)

    def scenario_total_slice(self, w: int, b: int) -> slice:
        start = self.scenario_total + (w * self.noise_scenarios + b) * self.periods
        return slice(start, start + self.periods)

    def aux_slice(self, w: int, b: int) -> slice:
        start = self.aux + (w * self.noise_scenarios + b) * self.periods
        return slice(start, start + self.periods)


class StochasticProgram(BaseModel):
    """Two-stage aggregator program with its data, ready for the LP solver."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    program: ConvexProgram
    layout: ProgramLayout
    names: Tuple[str, ...]
    regions: Tuple[FeasibleRegion, ...]
    tau: np.ndarray
    v: float
    wind: WindScenarioSet
    noise: LoadNoiseSet
