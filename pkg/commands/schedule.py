"""
``schedule``: instantiate each building's region for the target day, solve the
aggregator's stochastic program and sweep compensation, robustness and fleet size.
"""
import argparse
import logging
from typing import Dict, List

from commands.common import add_common_arguments, fleet, load_split, open_run, stage_error
from datastore import read_wind_csv
from errors import EmptyRegionError, FlexRegionError, InfeasibleProgramError
from models import DatasetRole, ScheduleReport
from services import plant_service, scheduler_service

logger = logging.getLogger(__name__)

STAGE = "schedule"
NOISE_SEED_OFFSET = 1
WIND_SEED_OFFSET = 2


def register(subparsers) -> None:
    parser = subparsers.add_parser(STAGE, help="Schedule the buildings against wind forecast errors")
    add_common_arguments(parser)
    parser.set_defaults(handler=run)


def _robustness_rows(targets, bundles, schedule_cfg, tau, wind, noise) -> List[Dict]:
    rows = []
    for alpha in sorted(schedule_cfg.alpha_grid):
        try:
            days = [
                scheduler_service.building_day(bundles[name], cfg, target, alpha)
                for name, (cfg, target) in targets.items()
            ]
            rows.extend(scheduler_service.sweep_robustness({alpha: days}, tau, schedule_cfg.v, wind, noise))
        except (EmptyRegionError, InfeasibleProgramError) as e:
            logger.warning("alpha=%g: %s", alpha, e.detail)
            rows.append({"sweep": "alpha", "alpha": float(alpha), "v": schedule_cfg.v, "status": type(e).__name__})
    return rows


def run(args: argparse.Namespace) -> int:
    """
    Writes ``schedule.json``, ``sweep_v.csv``, ``sweep_alpha.csv`` and ``timing.csv``.

    Only the timing report changes between identical reruns.
    """
    try:
        config, store = open_run(args)
        schedule_cfg = config.schedule
        periods = config.data.periods
        members = fleet(config, schedule_cfg.buildings)

        bundles, targets, days = {}, {}, []
        peak_kw = 0.0
        for name, building in members:
            cfg = building.plant_config()
            bundle = store.read_bundle(building.name).model_copy(update={"building": name})
            train = load_split(store, building.name, DatasetRole.TRAIN, periods)
            peak_kw += float(train.arrays().loads.max())
            seed = plant_service.building_seed(config.seed, f"{name}/target")
            target = scheduler_service.simulate_target_day(cfg, seed, schedule_cfg.target_day_of_week, periods)
            bundles[name] = bundle
            targets[name] = (cfg, target)
            days.append(scheduler_service.building_day(bundle, cfg, target))

        capacity_kw = schedule_cfg.wind_capacity_fraction * peak_kw
        if config.paths.wind_csv:
            wind = read_wind_csv(config.paths.wind_csv, periods)
        else:
            wind = scheduler_service.generate_wind_scenarios(
                periods, schedule_cfg.wind_scenarios, capacity_kw, config.seed + WIND_SEED_OFFSET
            )
        noise = scheduler_service.sample_load_noise(
            scheduler_service.noise_covariances(schedule_cfg.load_noise_std_kw, len(members)),
            schedule_cfg.noise_scenarios,
            config.seed + NOISE_SEED_OFFSET,
            periods,
        )
        tau = scheduler_service.tau_series(schedule_cfg.tau, periods)
        regions = [d.region for d in days]
        names = [d.name for d in days]

        schedule = scheduler_service.solve_program(
            scheduler_service.build_program(regions, tau, schedule_cfg.v, wind, noise, names)
        )
        report = ScheduleReport(
            config_hash=store.config_hash,
            day_of_week=schedule_cfg.target_day_of_week,
            alpha=config.training.alpha,
            wind_capacity_kw=capacity_kw,
            wind_scenarios=len(wind.generation_kwh),
            noise_scenarios=len(noise.scenarios_kw),
            clusters={d.name: d.clusters for d in days},
            schedule=schedule,
            mitigation=scheduler_service.mitigation_metric(schedule, wind, noise),
            violation_ch=scheduler_service.violation_metric(schedule, days, wind),
        )
        store.write_model(report, store.report_path("schedule.json"))
        logger.info("Schedule: objective %.3f, mitigation %.3f", schedule.objective, report.mitigation)

        store.write_report(
            scheduler_service.sweep_compensation(regions, names, tau, schedule_cfg.v_grid, wind, noise), "sweep_v.csv"
        )
        store.write_report(_robustness_rows(targets, bundles, schedule_cfg, tau, wind, noise), "sweep_alpha.csv")
        store.write_report(
            scheduler_service.sweep_buildings(regions, schedule_cfg.timing_buildings, tau, schedule_cfg.v, wind, noise),
            "timing.csv",
        )
        return 0
    except FlexRegionError:
        raise
    except Exception as e:
        raise stage_error(STAGE, "scheduling buildings", e)
