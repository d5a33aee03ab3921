"""Building data ingestion, validation, splitting and feature vectors."""
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from errors import DataValidationError, EmptyDatasetError
from models import DatasetRole, DayOfWeek, DayRecord, TrainingDataset

logger = logging.getLogger(__name__)

BASE_COLUMNS = [
    "day",
    "hour",
    "load_kw",
    "indoor_temp_c",
    "outdoor_temp_c",
    "solar_wm2",
    "day_of_week",
]
HVAC_COLUMN = "hvac_kw"


def parse_float(value: str, column: str, row: int) -> float:
    """
    Parse a required numeric CSV field.

    Args:
        value: Raw field text
        column: Column name, for the error message
        row: 1-based file row number (header is row 1)

    Returns:
        Parsed finite float

    Raises:
        DataValidationError: If the field is empty, not a number or not finite
    """
    text = value.strip()
    if not text:
        raise DataValidationError(f"missing value in column '{column}'", row=row)
    try:
        number = float(text)
    except ValueError:
        raise DataValidationError(f"malformed value '{text}' in column '{column}'", row=row)
    if not math.isfinite(number):
        raise DataValidationError(f"non-finite value in column '{column}'", row=row)
    return number


def parse_int(value: str, column: str, row: int) -> int:
    text = value.strip()
    try:
        return int(text)
    except ValueError:
        raise DataValidationError(f"malformed integer '{text}' in column '{column}'", row=row)


def load_dataset(
    path: Union[str, Path],
    periods: int,
    role: DatasetRole = DatasetRole.TRAIN,
) -> TrainingDataset:
    """
    Read and validate a building data CSV.

    Each day has one ``hour=0`` row carrying the initial indoor temperature
    followed by rows for hours 1..T. An optional ``hvac_kw`` column holds the
    true HVAC power; any other extra column becomes a numeric explanatory
    feature.

    Args:
        path: CSV file
        periods: Expected periods per day (T)
        role: Role assigned to the resulting dataset

    Returns:
        TrainingDataset with days in ascending day order

    Raises:
        DataValidationError: On malformed rows, incomplete days, duplicate
            (day, hour) keys or non-finite values
    """
    file = Path(path)
    if not file.is_file():
        raise DataValidationError(f"data file not found: {path}")
    frame = pd.read_csv(file, dtype=str, keep_default_na=False, encoding="utf-8")
    missing = [c for c in BASE_COLUMNS if c not in frame.columns]
    if missing:
        raise DataValidationError(f"{path} is missing columns {missing}")
    extra_columns = [c for c in frame.columns if c not in BASE_COLUMNS and c != HVAC_COLUMN]
    has_hvac = HVAC_COLUMN in frame.columns

    seen: Dict[Tuple[int, int], int] = {}
    days: Dict[int, Dict] = {}
    for index, record in enumerate(frame.to_dict(orient="records")):
        row = index + 2
        day = parse_int(record["day"], "day", row)
        hour = parse_int(record["hour"], "hour", row)
        if not 0 <= hour <= periods:
            raise DataValidationError(f"hour {hour} outside 0..{periods}", row=row)
        if (day, hour) in seen:
            raise DataValidationError(
                f"duplicate key (day {day}, hour {hour}), first seen at row {seen[(day, hour)]}", row=row
            )
        seen[(day, hour)] = row

        try:
            dow = DayOfWeek(record["day_of_week"].strip().lower())
        except ValueError:
            raise DataValidationError(f"unknown day_of_week '{record['day_of_week']}'", row=row)
        entry = days.setdefault(day, {"dow": dow, "first_row": row, "hours": {}, "initial": None})
        if entry["dow"] is not dow:
            raise DataValidationError(f"day {day} changes day_of_week", row=row)

        if hour == 0:
            entry["initial"] = parse_float(record["indoor_temp_c"], "indoor_temp_c", row)
            continue
        values = {
            column: parse_float(record[column], column, row)
            for column in ("load_kw", "indoor_temp_c", "outdoor_temp_c", "solar_wm2")
        }
        if has_hvac and record[HVAC_COLUMN].strip():
            values[HVAC_COLUMN] = parse_float(record[HVAC_COLUMN], HVAC_COLUMN, row)
        for column in extra_columns:
            values[column] = parse_float(record[column], column, row)
        entry["hours"][hour] = values

    records: List[DayRecord] = []
    for day in sorted(days):
        entry = days[day]
        hours = entry["hours"]
        if len(hours) != periods:
            raise DataValidationError(f"incomplete day {day}: {len(hours)} of {periods} periods")
        if entry["initial"] is None:
            raise DataValidationError(f"incomplete day {day}: no hour=0 row with the initial temperature")
        ordered = [hours[h] for h in range(1, periods + 1)]
        hvac = None
        if has_hvac:
            if any(HVAC_COLUMN not in values for values in ordered):
                if any(HVAC_COLUMN in values for values in ordered):
                    raise DataValidationError(f"day {day} has a partial hvac_kw series", row=entry["first_row"])
            else:
                hvac = tuple(values[HVAC_COLUMN] for values in ordered)
        try:
            records.append(
                DayRecord(
                    day_id=day,
                    day_of_week=entry["dow"],
                    initial_indoor_temp_c=entry["initial"],
                    load_kw=tuple(v["load_kw"] for v in ordered),
                    indoor_temp_c=tuple(v["indoor_temp_c"] for v in ordered),
                    outdoor_temp_c=tuple(v["outdoor_temp_c"] for v in ordered),
                    solar_wm2=tuple(v["solar_wm2"] for v in ordered),
                    hvac_kw=hvac,
                    extra={c: tuple(v[c] for v in ordered) for c in extra_columns},
                )
            )
        except ValidationError as e:
            message = e.errors()[0]["msg"]
            raise DataValidationError(f"day {day}: {message}", row=entry["first_row"])

    logger.info("Loaded %d days from %s", len(records), path)
    return TrainingDataset(days=tuple(records), periods=periods, role=role)


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


def write_dataset(ds: TrainingDataset, path: Union[str, Path]) -> Path:
    """
    Write a dataset in the format read by ``load_dataset``.

    Floats use the shortest round-trip representation so a reload reproduces
    every field exactly.
    """
    extra_columns = sorted({name for day in ds.days for name in day.extra})
    with_hvac = any(day.hvac_kw is not None for day in ds.days)
    columns = BASE_COLUMNS + ([HVAC_COLUMN] if with_hvac else []) + extra_columns

    rows = []
    for day in ds.days:
        dow = day.day_of_week.value
        head = {c: "" for c in columns}
        head.update(day=str(day.day_id), hour="0", indoor_temp_c=_fmt(day.initial_indoor_temp_c), day_of_week=dow)
        rows.append(head)
        for t in range(day.periods):
            row = {
                "day": str(day.day_id),
                "hour": str(t + 1),
                "load_kw": _fmt(day.load_kw[t]),
                "indoor_temp_c": _fmt(day.indoor_temp_c[t]),
                "outdoor_temp_c": _fmt(day.outdoor_temp_c[t]),
                "solar_wm2": _fmt(day.solar_wm2[t]),
                "day_of_week": dow,
            }
            if with_hvac:
                row[HVAC_COLUMN] = _fmt(day.hvac_kw[t]) if day.hvac_kw is not None else ""
            for name in extra_columns:
                row[name] = _fmt(day.extra[name][t])
            rows.append(row)

    file = Path(path)
    file.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows, columns=columns).to_csv(file, index=False, lineterminator="\n")
    return file


def split_dataset(
    ds: TrainingDataset,
    sizes: Sequence[int],
    seed: int,
) -> Tuple[TrainingDataset, TrainingDataset, TrainingDataset]:
    """
    Randomly partition a dataset into train, cross-validation and test sets.

    Args:
        ds: Source dataset
        sizes: (n_train, n_cv, n_test)
        seed: Seed of the permutation

    Returns:
        Three disjoint datasets; days keep their original order inside each

    Raises:
        DataValidationError: If the sizes exceed the available days
    """
    n_train, n_cv, n_test = sizes
    if min(sizes) < 0:
        raise DataValidationError("split sizes must be non-negative")
    if n_train + n_cv + n_test > ds.size:
        raise DataValidationError(
            f"split sizes {tuple(sizes)} exceed the {ds.size} available days"
        )
    order = np.random.default_rng(seed).permutation(ds.size)
    bounds = [0, n_train, n_train + n_cv, n_train + n_cv + n_test]
    roles = (DatasetRole.TRAIN, DatasetRole.CROSS_VALIDATION, DatasetRole.TEST)
    parts = []
    for role, start, stop in zip(roles, bounds[:-1], bounds[1:]):
        chosen = sorted(order[start:stop].tolist())
        parts.append(
            TrainingDataset(days=tuple(ds.days[i] for i in chosen), periods=ds.periods, role=role)
        )
    return parts[0], parts[1], parts[2]


def check_period(ds: TrainingDataset, t: int) -> None:
    if not 1 <= t <= ds.periods:
        raise DataValidationError(f"period {t} outside 1..{ds.periods}")


def require_days(ds: TrainingDataset, what: str) -> None:
    if ds.size == 0:
        raise EmptyDatasetError(f"{what}: dataset ({ds.role.value}) has no days")


def build_feature_vector(ds: TrainingDataset, k: int, t: int) -> np.ndarray:
    """``[p_1..p_t, phi_0, phi_in_t, phi_out_t]`` for the ``k``-th day (0-based)."""
    check_period(ds, t)
    day = ds.days[k]
    return np.array(
        list(day.load_kw[:t]) + [day.initial_indoor_temp_c, day.indoor_temp_c[t - 1], day.outdoor_temp_c[t - 1]],
        dtype=float,
    )


def feature_matrix(ds: TrainingDataset, t: int) -> np.ndarray:
    """W_t with one column per day, shape (t + 3, K)."""
    check_period(ds, t)
    arrays = ds.arrays()
    return np.vstack(
        [
            arrays.loads[:, :t].T,
            arrays.initial[None, :],
            arrays.indoor[:, t - 1][None, :],
            arrays.outdoor[:, t - 1][None, :],
        ]
    )
