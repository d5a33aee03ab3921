"""
``report``: human-readable tree dumps, region tables and cluster-count curves.
"""
import argparse
import logging
from typing import Dict, List

from commands.common import add_common_arguments, open_run, stage_error
from commands.train import selection_rows
from errors import FlexRegionError
from models import ModelBundle
from services import selector_service

logger = logging.getLogger(__name__)

STAGE = "report"


def register(subparsers) -> None:
    parser = subparsers.add_parser(STAGE, help="Describe every trained bundle")
    add_common_arguments(parser)
    parser.set_defaults(handler=run)


def region_rows(bundle: ModelBundle) -> List[Dict]:
    """One row per (period, cluster) with its limits and selected band."""
    rows = []
    for period in bundle.period_models:
        for phi in period.regions:
            band = phi.band
            rows.append(
                {
                    "building": bundle.building,
                    "t": phi.t,
                    "cluster": phi.cluster,
                    "days": len(period.clusters.members(phi.cluster)),
                    "p_min_kw": phi.p_min_kw,
                    "p_max_kw": phi.p_max_kw,
                    "theta_min_c": phi.theta_min_c,
                    "theta_max_c": phi.theta_max_c,
                    "beta": band.beta,
                    "pi_out": band.pi_out,
                    "band_area": band.area,
                    "alpha_unmet": band.alpha_unmet,
                }
            )
    return rows


def run(args: argparse.Namespace) -> int:
    try:
        config, store = open_run(args)
        for building in config.buildings:
            bundle = store.read_bundle(building.name)
            text = "".join(selector_service.dump_tree(period.tree) for period in bundle.period_models)
            store.write_text(text, f"trees_{building.name}.txt")
            store.write_report(region_rows(bundle), f"regions_{building.name}.csv")
            if bundle.selection is not None:
                store.write_report(selection_rows(building.name, bundle.selection), f"selection_{building.name}.csv")
            unmet = sum(phi.band.alpha_unmet for period in bundle.period_models for phi in period.regions)
            if unmet:
                logger.warning("%s: %d (cluster, period) bands miss alpha=%g", building.name, unmet, bundle.alpha)
        return 0
    except FlexRegionError:
        raise
    except Exception as e:
        raise stage_error(STAGE, "writing reports", e)
