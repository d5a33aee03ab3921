"""
``validate``: held-out metrics of every trained bundle and the baseline comparison.
"""
import argparse
import logging

from commands.common import add_common_arguments, load_split, open_run, stage_error
from errors import FlexRegionError
from models import DatasetRole, HvacSource
from services import validation_service

logger = logging.getLogger(__name__)

STAGE = "validate"


def register(subparsers) -> None:
    parser = subparsers.add_parser(STAGE, help="Evaluate bundles on the test days")
    add_common_arguments(parser)
    parser.add_argument(
        "--hvac-source",
        choices=[s.value for s in HvacSource],
        default=HvacSource.TOTAL_MINUS_BASE_ESTIMATE.value,
        help="HVAC power used by the RC baseline",
    )
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    """Writes ``validation.csv`` and ``comparison.csv`` covering every building."""
    try:
        config, store = open_run(args)
        periods = config.data.periods
        hvac_source = HvacSource(getattr(args, "hvac_source", HvacSource.TOTAL_MINUS_BASE_ESTIMATE.value))
        validation, comparison = [], []
        for building in config.buildings:
            bundle = store.read_bundle(building.name)
            train = load_split(store, building.name, DatasetRole.TRAIN, periods)
            test = load_split(store, building.name, DatasetRole.TEST, periods)
            validation.extend(validation_service.validation_rows(bundle, test))
            comparison.extend(validation_service.comparison_rows(bundle, train, test, hvac_source))
        store.write_report(validation, "validation.csv")
        store.write_report(comparison, "comparison.csv")
        return 0
    except FlexRegionError:
        raise
    except Exception as e:
        raise stage_error(STAGE, "validating bundles", e)
