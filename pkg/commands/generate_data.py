"""
``generate-data``: simulate every configured building and write its
train / cross-validation / test CSVs.
"""
import argparse
import logging

import numpy as np

from commands.common import add_common_arguments, open_run, stage_error
from errors import FlexRegionError
from models import DatasetRole
from services import data_service, plant_service

logger = logging.getLogger(__name__)

STAGE = "generate-data"


def register(subparsers) -> None:
    parser = subparsers.add_parser(STAGE, help="Simulate buildings and write the data splits")
    add_common_arguments(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    """
    Writes ``<data_dir>/<building>/{train,cv,test}.csv`` and a data summary report.

    Days are simulated consecutively so each day's initial temperature is the
    previous day's last reading, then split at random.
    """
    try:
        config, store = open_run(args)
        data = config.data
        rows = []
        for building in config.buildings:
            cfg = building.plant_config()
            seed = plant_service.building_seed(config.seed, building.name)
            n_days = sum(data.split)
            logger.info("%s: simulating %d days", building.name, n_days)
            plant_run = plant_service.generate_days(cfg, n_days, seed, data.start_day_of_week, data.periods)
            dataset = plant_run.dataset
            if not data.write_true_hvac:
                dataset = dataset.model_copy(
                    update={"days": tuple(day.model_copy(update={"hvac_kw": None}) for day in dataset.days)}
                )
            splits = data_service.split_dataset(dataset, data.split, seed)
            for role, split in zip((DatasetRole.TRAIN, DatasetRole.CROSS_VALIDATION, DatasetRole.TEST), splits):
                path = data_service.write_dataset(split, store.data_path(building.name, role.value))
                logger.info("%s: wrote %d %s days to %s", building.name, split.size, role.value, path)

            loads = dataset.arrays().loads
            rows.append(
                {
                    "building": building.name,
                    "days": dataset.size,
                    "peak_kw": float(loads.max()),
                    "mean_kw": float(loads.mean()),
                    "peak_to_average": float(loads.max() / loads.mean()),
                    "mean_indoor_c": float(np.mean(dataset.arrays().indoor)),
                }
            )
        store.write_report(rows, "data_summary.csv")
        return 0
    except FlexRegionError:
        raise
    except Exception as e:
        raise stage_error(STAGE, "generating data", e)
