"""Data-level strategies against class imbalance: random and heuristic resampling.

Every method returns the kept input rows in their original order, followed by
duplicated or synthetic rows. Distances are Euclidean on z-scored features.
The minority is the smaller class whatever its label; when positives outnumber
negatives the negatives are kept, duplicated or synthesized instead.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from hyperspot import logger
from hyperspot.helpers import CannotBalanceError, ConfigError, DataError

Resampled = Tuple[np.ndarray, np.ndarray]


class ResampleMethod(str, Enum):
    RANDOM_UNDER = "under"
    RANDOM_OVER = "over"
    SMOTE = "smote"
    NEAR_MISS = "nearmiss"


@dataclass(frozen=True)
class ResampleSpec:
    """A resampling method with its parameters."""

    method: ResampleMethod
    k_neighbors: int = 3
    seed: int = 0

    def __post_init__(self) -> None:
        """Validate the parameters."""
        if self.k_neighbors < 1:
            raise ConfigError(f"k_neighbors must be positive, got {self.k_neighbors}")


def _split_classes(y: np.ndarray, method: str) -> Tuple[int, np.ndarray, np.ndarray]:
    """Get the minority label and the row indices of the minority and the majority.

    The positives are the minority unless they outnumber the negatives, then the
    labels swap roles. Ties make the positives the minority.
    """
    labels = np.asarray(y)
    positives = np.flatnonzero(labels == 1)
    negatives = np.flatnonzero(labels != 1)
    if positives.size == 0 or negatives.size == 0:
        raise CannotBalanceError(method)
    if positives.size <= negatives.size:
        return 1, positives, negatives
    return 0, negatives, positives


def standardize(
    X: np.ndarray, reference: Optional[np.ndarray] = None
) -> np.ndarray:
    """Z-score the columns with the statistics of the reference rows."""
    reference = X if reference is None else reference
    mean = reference.mean(axis=0)
    scale = reference.std(axis=0)
    scale[scale == 0] = 1.0
    return (X - mean) / scale


def random_under_sample_indices(y: np.ndarray, seed: int) -> np.ndarray:
    """Get the row indices kept by random under-sampling, in ascending order."""
    _, minority, majority = _split_classes(y, "random under-sampling")
    rng = np.random.default_rng(seed)
    kept = rng.choice(majority, size=minority.size, replace=False)
    return np.sort(np.concatenate([minority, kept]))


def random_under_sample(X: np.ndarray, y: np.ndarray, seed: int = 0) -> Resampled:
    """Drop majority rows uniformly without replacement until the classes balance."""
    indices = random_under_sample_indices(y, seed)
    return X[indices], np.asarray(y)[indices]


def random_over_sample(X: np.ndarray, y: np.ndarray, seed: int = 0) -> Resampled:
    """Duplicate random minority rows until the classes balance."""
    _, minority, majority = _split_classes(y, "random over-sampling")
    rng = np.random.default_rng(seed)
    duplicates = rng.choice(minority, size=majority.size - minority.size, replace=True)
    indices = np.concatenate([np.arange(len(y)), np.sort(duplicates)])
    return X[indices], np.asarray(y)[indices]


def interpolate(p: np.ndarray, r: np.ndarray, t: float) -> np.ndarray:
    """Get the point at position t on the segment from p to r."""
    return p + t * (r - p)


def smote(
    X: np.ndarray, y: np.ndarray, k: int = 3, seed: int = 0, strict: bool = False
) -> Resampled:
    """Over-sample the minority class with synthetic points.

    The base points cycle through the minority rows; each synthetic point lies on the
    segment between its base point and one of the base point's k nearest minority
    neighbors.
    """
    minority_label, minority, majority = _split_classes(y, "SMOTE")
    if minority.size < 2:
        if strict:
            raise DataError("SMOTE needs at least two minority rows")
        logger.warning(
            "SMOTE needs at least two minority rows, using random over-sampling."
        )
        return random_over_sample(X, y, seed)

    rng = np.random.default_rng(seed)
    points = X[minority].astype(float)
    scaled = standardize(points, X)
    distances = cdist(scaled, scaled)
    np.fill_diagonal(distances, np.inf)
    k = min(k, minority.size - 1)
    nearest = np.argsort(distances, axis=1, kind="stable")[:, :k]

    n_synthetic = majority.size - minority.size
    bases = np.arange(n_synthetic) % minority.size
    choices = nearest[bases, rng.integers(0, k, size=n_synthetic)]
    gaps = rng.random(n_synthetic)[:, np.newaxis]
    synthetic = interpolate(points[bases], points[choices], gaps)

    X_out = np.concatenate([X.astype(float), synthetic])
    y_out = np.concatenate(
        [np.asarray(y), np.full(n_synthetic, minority_label, dtype=np.asarray(y).dtype)]
    )
    return X_out, y_out


def near_miss_scores(
    X: np.ndarray, y: np.ndarray, k: int = 3, standardize_features: bool = True
) -> Tuple[np.ndarray, np.ndarray]:
    """Get the majority rows and their mean distance to the k nearest minority rows."""
    _, minority, majority = _split_classes(y, "NearMiss")
    features = standardize(X.astype(float)) if standardize_features else X.astype(float)
    distances = cdist(features[majority], features[minority])
    k = min(k, minority.size)
    nearest = np.sort(distances, axis=1)[:, :k]
    return majority, nearest.mean(axis=1)


def near_miss(
    X: np.ndarray, y: np.ndarray, k: int = 3, standardize_features: bool = True
) -> Resampled:
    """Keep the majority rows closest to their k nearest minority rows.

    Ties are broken by the lower row index.
    """
    _, minority, _ = _split_classes(y, "NearMiss")
    majority, scores = near_miss_scores(X, y, k, standardize_features)
    order = np.lexsort((majority, scores))
    kept = majority[order[: minority.size]]
    indices = np.sort(np.concatenate([minority, kept]))
    return X[indices], np.asarray(y)[indices]


def resample(spec: ResampleSpec, X: np.ndarray, y: np.ndarray) -> Resampled:
    """Apply the resampling method of the spec."""
    if spec.method == ResampleMethod.RANDOM_UNDER:
        return random_under_sample(X, y, spec.seed)
    if spec.method == ResampleMethod.RANDOM_OVER:
        return random_over_sample(X, y, spec.seed)
    if spec.method == ResampleMethod.SMOTE:
        return smote(X, y, spec.k_neighbors, spec.seed)
    if spec.method == ResampleMethod.NEAR_MISS:
        return near_miss(X, y, spec.k_neighbors)
    raise ConfigError(f"unknown resampling method '{spec.method}'")
