"""
File storage for model bundles, reports, schedules and wind scenarios.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

import pandas as pd
from pydantic import BaseModel, ValidationError

from errors import BundleSchemaError, DataValidationError
from models import SCHEMA_VERSION, ModelBundle, PathsConfig, WindScenarioSet

logger = logging.getLogger(__name__)

DATA_FILES = {"train": "train.csv", "cross_validation": "cv.csv", "test": "test.csv"}
WIND_COLUMNS = ["scenario", "hour", "generation_kwh"]


class DataStore:
    """Resolves output locations and reads/writes every run artifact."""

    def __init__(self, paths: PathsConfig, config_hash: str = ""):
        self.paths = paths
        self.config_hash = config_hash
        self.data_dir = Path(paths.resolve("data_dir"))
        self.bundle_dir = Path(paths.resolve("bundle_dir"))
        self.report_dir = Path(paths.resolve("report_dir"))

    def data_path(self, building: str, role: str) -> Path:
        return self.data_dir / building / DATA_FILES[role]

    def bundle_path(self, building: str) -> Path:
        return self.bundle_dir / f"{building}.json"

    def report_path(self, name: str) -> Path:
        return self.report_dir / name

    def write_model(self, model: BaseModel, path: Path) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(model.model_dump_json(indent=2) + "\n", encoding="utf-8")
        return path

    def write_bundle(self, bundle: ModelBundle) -> Path:
        path = self.write_model(bundle, self.bundle_path(bundle.building))
        logger.info("Wrote model bundle %s", path)
        return path

    def read_bundle(self, building: str) -> ModelBundle:
        """
        Reads a building's model bundle and checks its schema version.

        Args:
            building: Building name

        Returns:
            The validated ModelBundle

        Raises:
            BundleSchemaError: If the file is missing, malformed or of another schema version
        """
        path = self.bundle_path(building)
        if not path.is_file():
            raise BundleSchemaError(f"model bundle not found: {path}")
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise BundleSchemaError(f"malformed bundle {path}: {str(e)}")
        version = raw.get("schema_version")
        if version != SCHEMA_VERSION:
            raise BundleSchemaError(
                f"bundle {path} has schema_version {version}, expected {SCHEMA_VERSION}"
            )
        try:
            return ModelBundle.model_validate(raw)
        except ValidationError as e:
            raise BundleSchemaError(f"invalid bundle {path}: {str(e)}")

    def write_report(
        self,
        rows: Union[pd.DataFrame, Iterable[Dict[str, Any]]],
        name: str,
        columns: Optional[List[str]] = None,
    ) -> Path:
        """Writes a CSV report prefixed by the schema version and config hash."""
        frame = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(list(rows), columns=columns)
        path = self.report_path(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as handle:
            handle.write(f"# schema_version={SCHEMA_VERSION}\n")
            handle.write(f"# config_hash={self.config_hash}\n")
            frame.to_csv(handle, index=False, lineterminator="\n")
        logger.info("Wrote report %s (%d rows)", path, len(frame))
        return path

    def write_text(self, text: str, name: str) -> Path:
        path = self.report_path(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        return path


def read_report(path: Union[str, Path]) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


def read_wind_csv(path: Union[str, Path], periods: int) -> WindScenarioSet:
    """
    Reads wind scenarios from a ``scenario,hour,generation_kwh`` CSV.

    Args:
        path: CSV file
        periods: Expected number of hours per scenario

    Returns:
        Equally weighted WindScenarioSet, scenarios in ascending id order

    Raises:
        DataValidationError: On missing columns, incomplete scenarios or negative values
    """
    frame = pd.read_csv(path)
    missing = [c for c in WIND_COLUMNS if c not in frame.columns]
    if missing:
        raise DataValidationError(f"wind file {path} is missing columns {missing}")
    if frame[WIND_COLUMNS].isna().any().any():
        bad = int(frame[WIND_COLUMNS].isna().any(axis=1).idxmax()) + 2
        raise DataValidationError("empty field in wind file", row=bad)
    if (frame["generation_kwh"] < 0).any():
        bad = int((frame["generation_kwh"] < 0).idxmax()) + 2
        raise DataValidationError("negative wind generation", row=bad)

    scenarios = []
    for scenario, group in frame.groupby("scenario", sort=True):
        hours = sorted(group["hour"].astype(int).tolist())
        if hours != list(range(1, periods + 1)):
            raise DataValidationError(f"incomplete wind scenario {scenario}")
        scenarios.append(group.sort_values("hour")["generation_kwh"].astype(float).tolist())
    return WindScenarioSet.from_weights(scenarios)
