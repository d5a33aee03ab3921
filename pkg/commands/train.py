"""
``train``: fit a model bundle per building from its train and
cross-validation data.
"""
import argparse
import logging

from commands.common import add_common_arguments, load_split, open_run, stage_error
from errors import FlexRegionError
from models import ClusterSelectionReport, DatasetRole
from services import training_service

logger = logging.getLogger(__name__)

STAGE = "train"


def register(subparsers) -> None:
    parser = subparsers.add_parser(STAGE, help="Train region models for every building")
    add_common_arguments(parser)
    parser.set_defaults(handler=run)


def selection_rows(building: str, selection: ClusterSelectionReport):
    """Cluster-count curve: one row per candidate count."""
    return [
        {
            "building": building,
            "clusters": c,
            "cv_rmse": rmse,
            "cv_out_of_band": out,
            "tree_accuracy": accuracy,
            "selected": c == selection.selected,
        }
        for c, rmse, out, accuracy in zip(
            selection.candidates, selection.cv_rmse, selection.cv_out_of_band, selection.tree_accuracy
        )
    ]


def run(args: argparse.Namespace) -> int:
    try:
        config, store = open_run(args)
        periods = config.data.periods
        for building in config.buildings:
            name = building.name
            train = load_split(store, name, DatasetRole.TRAIN, periods)
            cv = None
            if config.training.fixed_clusters is None:
                cv = load_split(store, name, DatasetRole.CROSS_VALIDATION, periods)
            logger.info("%s: training on %d days", name, train.size)
            bundle = training_service.train_building(train, cv, name, config.training, config.seed)
            store.write_bundle(bundle)
            if bundle.selection is not None:
                store.write_report(selection_rows(name, bundle.selection), f"selection_{name}.csv")
        return 0
    except FlexRegionError:
        raise
    except Exception as e:
        raise stage_error(STAGE, "training bundles", e)
