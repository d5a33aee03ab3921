"""
Per-period training pipeline: cluster, fit bands, estimate limits, grow the tree.
"""
import logging
from typing import List, Optional, Sequence, Union

import numpy as np

from errors import DataValidationError
from models import ClusterSelectionReport, ModelBundle, PeriodModel, TrainingConfig, TrainingDataset
from services import band_service, clustering_service, region_service, selector_service, validation_service
from services.data_service import require_days

logger = logging.getLogger(__name__)

# relative CV-RMSE difference below which two cluster counts tie
SELECTION_TIE_TOLERANCE = 1e-9


def train_period(
    ds: TrainingDataset,
    t: int,
    n_clusters: int,
    cfg: TrainingConfig,
    seed: int,
    beta_grid_size: Optional[int] = None,
    store_sweeps: Optional[bool] = None,
) -> PeriodModel:
    """
    Fit every cluster's region parameters at one period and its selector tree.

    Args:
        ds: Training days
        t: Period (1-based)
        n_clusters: Requested cluster count
        cfg: Training configuration
        seed: k-means seed
        beta_grid_size: Overrides ``cfg.beta_grid_size``
        store_sweeps: Overrides ``cfg.store_sweeps``

    Returns:
        PeriodModel
    """
    M = beta_grid_size or cfg.beta_grid_size
    keep = cfg.store_sweeps if store_sweeps is None else store_sweeps
    clusters = clustering_service.cluster_period(ds, t, n_clusters, seed, cfg.kmeans_restarts)
    members = clusters.assignments
    reports = [
        band_service.sweep_report(band_service.cluster_data(ds, days, t), M, cfg.mode, cfg.alpha) for days in members
    ]
    if cfg.shared_beta:
        reports = band_service.select_shared_beta(reports, [len(days) for days in members], cfg.alpha)
    regions = tuple(
        region_service.region_parameters(region_service.estimate_limits(ds, days, t), report, c, t, keep)
        for c, (days, report) in enumerate(zip(members, reports), start=1)
    )
    records = [ds.day(day_id).explanatory(t) for day_id in clusters.day_ids]
    schema = selector_service.feature_schema(cfg.extra_features)
    tree = selector_service.train_tree(records, clusters.labels, cfg.tree, schema, t)
    unmet = sum(r.alpha_unmet for r in reports)
    logger.debug("t=%d: %d clusters, tree accuracy %.3f, %d alpha unmet", t, clusters.n_clusters, tree.training_accuracy, unmet)
    return PeriodModel(t=t, clusters=clusters, regions=regions, tree=tree)


def train_bundle(
    ds: TrainingDataset,
    building: str,
    cfg: TrainingConfig,
    seed: int,
    n_clusters: Union[int, Sequence[int]],
    selection: Optional[ClusterSelectionReport] = None,
    beta_grid_size: Optional[int] = None,
    store_sweeps: Optional[bool] = None,
) -> ModelBundle:
    """
    Train every period of one building.

    ``n_clusters`` is either one count for all periods or one per period.
    """
    require_days(ds, f"training '{building}'")
    counts = [n_clusters] * ds.periods if isinstance(n_clusters, int) else list(n_clusters)
    if len(counts) != ds.periods:
        raise DataValidationError(f"need one cluster count per period, got {len(counts)} for {ds.periods}")
    period_models = []
    for t, count in enumerate(counts, start=1):
        period_models.append(train_period(ds, t, count, cfg, seed, beta_grid_size, store_sweeps))
    return ModelBundle(
        building=building,
        periods=ds.periods,
        mode=cfg.mode,
        alpha=cfg.alpha,
        beta_grid_size=beta_grid_size or cfg.beta_grid_size,
        shared_beta=cfg.shared_beta,
        seed=seed,
        feature_schema=selector_service.feature_schema(cfg.extra_features),
        period_models=tuple(period_models),
        selection=selection,
    )


def _argmin_smallest(values: Sequence[float]) -> int:
    best = min(values)
    tol = SELECTION_TIE_TOLERANCE * max(1.0, abs(best))
    return next(i for i, v in enumerate(values) if v <= best + tol)


def select_num_clusters(
    train: TrainingDataset,
    cv: TrainingDataset,
    cfg: TrainingConfig,
    seed: int,
    building: str = "building",
) -> ClusterSelectionReport:
    """
    Choose the cluster count minimizing the band RMSE on cross-validation days.

    Every candidate runs the full pipeline with the same seed; cross-validation
    days are routed to clusters by the trained trees. Ties go to the smaller count.

    Raises:
        DataValidationError: If a candidate exceeds the number of training days
        EmptyDatasetError: If either set is empty
    """
    require_days(train, "cluster-count selection")
    require_days(cv, "cluster-count selection")
    candidates = sorted(set(cfg.cluster_candidates))
    too_many = [c for c in candidates if c > train.size]
    if too_many:
        raise DataValidationError(f"cluster candidates {too_many} exceed the {train.size} training days")

    cv_rmse: List[float] = []
    per_period: List[List[float]] = []
    out_of_band: List[float] = []
    accuracy: List[float] = []
    for C in candidates:
        bundle = train_bundle(train, building, cfg, seed, C, beta_grid_size=cfg.selection_beta_grid_size, store_sweeps=False)
        evaluation = validation_service.evaluate_bands(bundle, cv)
        errors = evaluation.errors
        cv_rmse.append(float(np.sqrt(np.mean(errors**2))))
        per_period.append(np.sqrt(np.mean(errors**2, axis=0)).tolist())
        out_of_band.append(float(np.mean(evaluation.outside)))
        accuracy.append(float(np.mean([p.tree.training_accuracy for p in bundle.period_models])))
        logger.info("%s: C=%d CV band RMSE %.4f degC, out of band %.3f", building, C, cv_rmse[-1], out_of_band[-1])

    selected = candidates[_argmin_smallest(cv_rmse)]
    columns = np.asarray(per_period)
    selected_per_period = tuple(candidates[_argmin_smallest(columns[:, i].tolist())] for i in range(train.periods))
    logger.info("%s: selected C=%d", building, selected)
    return ClusterSelectionReport(
        candidates=tuple(candidates),
        cv_rmse=tuple(cv_rmse),
        cv_rmse_per_period=tuple(tuple(row) for row in per_period),
        cv_out_of_band=tuple(out_of_band),
        tree_accuracy=tuple(accuracy),
        selected=selected,
        selected_per_period=selected_per_period,
    )


def train_building(
    train: TrainingDataset,
    cv: Optional[TrainingDataset],
    building: str,
    cfg: TrainingConfig,
    seed: int,
) -> ModelBundle:
    """Fixed cluster count when configured, otherwise cross-validated selection first."""
    if cfg.fixed_clusters is not None:
        logger.info("%s: training with fixed C=%d", building, cfg.fixed_clusters)
        return train_bundle(train, building, cfg, seed, cfg.fixed_clusters)
    if cv is None:
        raise DataValidationError(f"'{building}': cluster-count selection needs a cross-validation set")
    selection = select_num_clusters(train, cv, cfg, seed, building)
    counts = selection.selected_per_period if cfg.per_period_clusters else selection.selected
    return train_bundle(train, building, cfg, seed, counts, selection=selection)
