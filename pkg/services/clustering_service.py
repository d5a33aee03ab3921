"""Per-period clustering of training days over normalized feature vectors."""
import logging
import warnings
from typing import NamedTuple, Tuple

import numpy as np
from sklearn.cluster import KMeans
from sklearn.exceptions import ConvergenceWarning

from errors import DataValidationError
from models import ClusterModel, TrainingDataset
from services.data_service import feature_matrix, require_days

logger = logging.getLogger(__name__)

DEGENERATE_RELATIVE_TOL = 1e-12
MAX_ITER = 300


class RowNormalization(NamedTuple):
    mean: np.ndarray
    scale: np.ndarray
    degenerate: np.ndarray


class KMeansResult(NamedTuple):
    labels: np.ndarray  # 1-based, one per column
    centroids: np.ndarray  # (C, dim)
    sse: float


def normalize_rows(W: np.ndarray) -> Tuple[np.ndarray, RowNormalization]:
    """
    Center every row of W and scale it to unit l2 norm.

    Rows with no spread (relative to their magnitude) are set to zero and
    flagged as degenerate.

    Args:
        W: Feature matrix, one column per day

    Returns:
        Normalized matrix and the parameters needed to normalize new columns
    """
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[1] < 1:
        raise DataValidationError("normalize_rows needs a matrix with at least one column")
    mean = W.mean(axis=1)
    centered = W - mean[:, None]
    norm = np.linalg.norm(centered, axis=1)
    magnitude = np.maximum(1.0, np.max(np.abs(W), axis=1)) * np.sqrt(W.shape[1])
    degenerate = norm <= DEGENERATE_RELATIVE_TOL * magnitude
    scale = np.where(degenerate, 1.0, norm)
    normalized = np.where(degenerate[:, None], 0.0, centered / scale[:, None])
    return normalized, RowNormalization(mean, scale, degenerate)


def apply_normalization(w: np.ndarray, params: RowNormalization) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    return np.where(params.degenerate, 0.0, (w - params.mean) / params.scale)


def canonical_labels(labels: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Relabel clusters 1..C in order of first appearance; returns (labels, old ids in new order)."""
    order = []
    for label in labels:
        if label not in order:
            order.append(int(label))
    mapping = {old: new for new, old in enumerate(order, start=1)}
    return np.array([mapping[int(l)] for l in labels], dtype=int), np.array(order, dtype=int)


def kmeans(W_norm: np.ndarray, n_clusters: int, seed: int, restarts: int = 10) -> KMeansResult:
    """
    Lloyd's k-means over the columns of ``W_norm``.

    k-means++ seeding, best of ``restarts`` runs by within-cluster SSE.

    Raises:
        DataValidationError: If ``n_clusters`` exceeds the number of columns
    """
    points = np.asarray(W_norm, dtype=float).T
    if n_clusters < 1 or n_clusters > points.shape[0]:
        raise DataValidationError(f"cannot form {n_clusters} clusters from {points.shape[0]} days")
    model = KMeans(
        n_clusters=n_clusters,
        init="k-means++",
        n_init=restarts,
        max_iter=MAX_ITER,
        tol=0.0,
        algorithm="lloyd",
        random_state=seed,
    )
    with warnings.catch_warnings():
        # fewer distinct points than clusters; handled below
        warnings.simplefilter("ignore", ConvergenceWarning)
        raw = model.fit_predict(points)
    labels, order = canonical_labels(raw)
    if order.size < n_clusters:
        logger.warning("k-means found only %d of %d clusters", order.size, n_clusters)
    centroids = model.cluster_centers_[order]
    return KMeansResult(labels=labels, centroids=centroids, sse=float(model.inertia_))


def cluster_period(ds: TrainingDataset, t: int, n_clusters: int, seed: int, restarts: int = 10) -> ClusterModel:
    """
    Partition the days of ``ds`` at period ``t``.

    Args:
        ds: Training days
        t: Period (1-based)
        n_clusters: Requested cluster count C_t
        seed: k-means seed
        restarts: k-means++ restarts

    Returns:
        ClusterModel with the normalization needed to label new days
    """
    require_days(ds, f"clustering period {t}")
    W = feature_matrix(ds, t)
    W_norm, params = normalize_rows(W)
    if params.degenerate.any():
        logger.debug("t=%d: %d degenerate feature rows", t, int(params.degenerate.sum()))
    result = kmeans(W_norm, n_clusters, seed, restarts)
    return ClusterModel(
        t=t,
        n_clusters=int(result.centroids.shape[0]),
        centroids=tuple(tuple(row) for row in result.centroids.tolist()),
        day_ids=tuple(ds.day_ids),
        labels=tuple(result.labels.tolist()),
        row_mean=tuple(params.mean.tolist()),
        row_scale=tuple(params.scale.tolist()),
        degenerate_rows=tuple(bool(d) for d in params.degenerate),
        sse=result.sse,
    )


def assign_cluster(model: ClusterModel, w: np.ndarray) -> int:
    """Nearest-centroid label of a raw feature vector of length t + 3."""
    w = np.asarray(w, dtype=float)
    if w.shape != (model.t + 3,):
        raise DataValidationError(f"feature vector must have length {model.t + 3}")
    params = RowNormalization(
        np.asarray(model.row_mean), np.asarray(model.row_scale), np.asarray(model.degenerate_rows)
    )
    z = apply_normalization(w, params)
    distances = np.linalg.norm(np.asarray(model.centroids) - z, axis=1)
    return int(np.argmin(distances)) + 1


def within_cluster_sse(points: np.ndarray, labels: np.ndarray) -> float:
    """SSE of row-wise ``points`` grouped by ``labels``."""
    total = 0.0
    for label in np.unique(labels):
        members = points[labels == label]
        total += float(np.sum((members - members.mean(axis=0)) ** 2))
    return total
