"""
Command-line entry point: learn building flexibility regions from coarse data
and schedule them against wind forecast errors.
"""
import argparse
import logging
import sys
from typing import List, Optional

from commands import generate_data, report, schedule, train, validate
from config import get_log_level
from errors import EXIT_OK, FlexRegionError

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flexregion",
        description="Robust feasible regions of building loads and wind-balancing schedules",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    # Register commands
    for command in (generate_data, train, validate, schedule, report):
        command.register(subparsers)
    return parser


def configure_logging() -> None:
    logging.basicConfig(level=get_log_level(), format=LOG_FORMAT, stream=sys.stderr)


def main(argv: Optional[List[str]] = None) -> int:
    """Runs one command and maps its failure to the process exit code."""
    args = build_parser().parse_args(argv)
    configure_logging()
    try:
        return args.handler(args) or EXIT_OK
    except FlexRegionError as e:
        logger.error("%s", e.detail)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
