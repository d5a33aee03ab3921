"""
Helpers shared by the command modules.
"""
import argparse
import logging
from typing import List, Tuple

from config import config_hash, load_run_config
from datastore import DataStore
from errors import NumericalError
from models import BuildingConfig, DatasetRole, RunConfig, TrainingDataset
from services import data_service

logger = logging.getLogger(__name__)


def add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="TOML or JSON run configuration")
    parser.add_argument("--seed", type=int, help="Override the configured seed")
    parser.add_argument("--out", help="Override the output directory")


def open_run(args: argparse.Namespace) -> Tuple[RunConfig, DataStore]:
    config = load_run_config(args.config, args.seed, args.out)
    return config, DataStore(config.paths, config_hash(config))


def load_split(store: DataStore, building: str, role: DatasetRole, periods: int) -> TrainingDataset:
    return data_service.load_dataset(store.data_path(building, role.value), periods, role)


def fleet(config: RunConfig, size: int) -> List[Tuple[str, BuildingConfig]]:
    """``size`` buildings drawn cyclically from the configured ones, with unique names."""
    members = []
    for i in range(size):
        building = config.buildings[i % len(config.buildings)]
        round_ = i // len(config.buildings)
        name = building.name if round_ == 0 else f"{building.name}_{round_ + 1}"
        members.append((name, building))
    return members


def stage_error(stage: str, what: str, e: Exception) -> NumericalError:
    logger.debug("[%s] unexpected failure", stage, exc_info=e)
    return NumericalError(f"[{stage}] Error {what}: {str(e)}")
