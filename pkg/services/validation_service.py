"""Held-out evaluation of trained bundles and the baseline comparison."""
import logging
from typing import Dict, List, NamedTuple, Optional

import numpy as np

from errors import BundleSchemaError, EmptyDatasetError
from models import HvacSource, ModelBundle, TrainingDataset
from services import band_service, baseline_service, clustering_service, region_service, selector_service
from services.data_service import build_feature_vector

logger = logging.getLogger(__name__)

MODEL_RC = "rc"
MODEL_CENTRAL = "blse_central"


class BandEvaluation(NamedTuple):
    chosen: np.ndarray  # (K, T) tree-predicted cluster
    lower: np.ndarray  # (K, T)
    upper: np.ndarray  # (K, T)
    observed: np.ndarray  # (K, T)

    @property
    def errors(self) -> np.ndarray:
        """Hinge distance of each observation to its band."""
        return np.maximum(self.observed - self.upper, 0.0) + np.maximum(self.lower - self.observed, 0.0)

    @property
    def outside(self) -> np.ndarray:
        return (self.upper <= self.observed) | (self.lower >= self.observed)

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower


def check_compatible(bundle: ModelBundle, ds: TrainingDataset) -> None:
    if ds.periods != bundle.periods:
        raise BundleSchemaError(f"bundle '{bundle.building}' has {bundle.periods} periods, data has {ds.periods}")


def evaluate_bands(bundle: ModelBundle, ds: TrainingDataset, alpha: Optional[float] = None) -> BandEvaluation:
    """
    Bands of every day of ``ds`` with each period's cluster chosen by the tree.

    Raises:
        EmptyDatasetError: If ``ds`` has no days
        BundleSchemaError: If the horizons differ
    """
    if ds.size == 0:
        raise EmptyDatasetError(f"cannot evaluate '{bundle.building}' on an empty {ds.role.value} set")
    check_compatible(bundle, ds)
    K, T = ds.size, ds.periods
    chosen = np.zeros((K, T), dtype=int)
    lower = np.zeros((K, T))
    upper = np.zeros((K, T))
    observed = ds.arrays().indoor
    for period in bundle.period_models:
        t = period.t
        parameters = region_service.period_parameters(bundle, period, alpha)
        X = band_service.cluster_data(ds, None, t).X
        for k, day in enumerate(ds.days):
            c = selector_service.predict_cluster(period.tree, day.explanatory(t))
            theta_l, theta_u = band_service.band_values(parameters[c - 1].band, X[k : k + 1])
            chosen[k, t - 1] = c
            lower[k, t - 1] = theta_l[0]
            upper[k, t - 1] = theta_u[0]
    return BandEvaluation(chosen, lower, upper, observed)


def holdout_tree_accuracy(bundle: ModelBundle, ds: TrainingDataset) -> np.ndarray:
    """
    Per-period agreement of the tree with the nearest-centroid cluster of each day.

    Returns:
        Array of length T
    """
    accuracy = np.zeros(bundle.periods)
    for period in bundle.period_models:
        t = period.t
        records = [day.explanatory(t) for day in ds.days]
        labels = [clustering_service.assign_cluster(period.clusters, build_feature_vector(ds, k, t)) for k in range(ds.size)]
        accuracy[t - 1] = selector_service.tree_accuracy(period.tree, records, labels)
    return accuracy


def validation_rows(
    bundle: ModelBundle,
    ds: TrainingDataset,
    alpha: Optional[float] = None,
) -> List[Dict]:
    """
    Per-period and overall held-out metrics of one building.

    Columns: building, t, out_of_band_pct, band_rmse, mean_band_width, tree_accuracy.
    The overall row has ``t = "all"``.
    """
    evaluation = evaluate_bands(bundle, ds, alpha)
    accuracy = holdout_tree_accuracy(bundle, ds)
    errors = evaluation.errors
    rows = []
    for t in range(1, bundle.periods + 1):
        i = t - 1
        rows.append(
            {
                "building": bundle.building,
                "t": str(t),
                "out_of_band_pct": 100.0 * float(np.mean(evaluation.outside[:, i])),
                "band_rmse": float(np.sqrt(np.mean(errors[:, i] ** 2))),
                "mean_band_width": float(np.mean(evaluation.width[:, i])),
                "tree_accuracy": float(accuracy[i]),
            }
        )
    overall = {
        "building": bundle.building,
        "t": "all",
        "out_of_band_pct": 100.0 * float(np.mean(evaluation.outside)),
        "band_rmse": float(np.sqrt(np.mean(errors**2))),
        "mean_band_width": float(np.mean(evaluation.width)),
        "tree_accuracy": float(np.mean(accuracy)),
    }
    rows.append(overall)
    logger.info(
        "%s: %.1f%% out of band, band RMSE %.3f degC on %d %s days",
        bundle.building,
        overall["out_of_band_pct"],
        overall["band_rmse"],
        ds.size,
        ds.role.value,
    )
    return rows


def central_errors(bundle: ModelBundle, train: TrainingDataset, test: TrainingDataset) -> np.ndarray:
    """
    Residuals of the collapsed-band fit on ``test``, (K, T).

    Each cluster's central fit uses that cluster's training days; test days
    are routed by the tree.
    """
    check_compatible(bundle, test)
    errors = np.zeros((test.size, test.periods))
    for period in bundle.period_models:
        t = period.t
        fits = [
            band_service.fit_central(band_service.cluster_data(train, period.clusters.members(c), t), bundle.mode)
            for c in range(1, period.clusters.n_clusters + 1)
        ]
        data = band_service.cluster_data(test, None, t)
        for k, day in enumerate(test.days):
            c = selector_service.predict_cluster(period.tree, day.explanatory(t))
            _, central = band_service.band_values(fits[c - 1], data.X[k : k + 1])
            errors[k, t - 1] = data.y[k] - central[0]
    return errors


def comparison_rows(
    bundle: ModelBundle,
    train: TrainingDataset,
    test: TrainingDataset,
    hvac_source: HvacSource = HvacSource.TOTAL_MINUS_BASE_ESTIMATE,
    alpha: Optional[float] = None,
) -> List[Dict]:
    """
    Test RMSE per period of the RC baseline, the central fit and the robust band.

    Columns: building, model, t, rmse. The robust band's RMSE is the hinge
    error outside its band. The RC baseline predicts periods 2..T only, since
    period 1 has no preceding reading paired with its inputs.
    """
    if test.size == 0:
        raise EmptyDatasetError(f"cannot compare models of '{bundle.building}' on an empty test set")
    alpha = bundle.alpha if alpha is None else alpha
    base = baseline_service.estimate_base_load(train)
    rc = baseline_service.fit_rc(train, hvac_source, base)
    # (errors, first predicted period)
    per_model = {
        MODEL_RC: (baseline_service.rc_errors(rc, test, base), 2),
        MODEL_CENTRAL: (central_errors(bundle, train, test), 1),
        f"blse_{alpha:g}": (evaluate_bands(bundle, test, alpha).errors, 1),
    }
    rows = []
    for model, (errors, first) in per_model.items():
        rmse = np.sqrt(np.mean(errors**2, axis=0))
        rows.extend(
            {"building": bundle.building, "model": model, "t": t, "rmse": float(rmse[t - first])}
            for t in range(first, test.periods + 1)
        )
        logger.info("%s: %s test RMSE %.4f degC", bundle.building, model, float(np.sqrt(np.mean(errors**2))))
    return rows
