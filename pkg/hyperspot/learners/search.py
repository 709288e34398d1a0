"""Hyperparameter selection by k-fold cross validation on the training rows."""
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from hyperspot import logger
from hyperspot.dataset import SpatioTemporalFrame
from hyperspot.evaluation import ranking_auc
from hyperspot.helpers import ConfigError, DataError
from hyperspot.learners import fit
from hyperspot.learners.base import LearnerSpec

# Transforms the rows of a training fold into (X, y, weights) before fitting
Prepared = Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]
Prepare = Callable[[np.ndarray, np.ndarray], Prepared]
Metric = Callable[..., float]


def fold_partition(
    n_rows: int,
    folds: int = 5,
    seed: int = 0,
    labels: Optional[np.ndarray] = None,
    max_draws: int = 100,
) -> List[np.ndarray]:
    """Partition the row indices into disjoint folds of (almost) equal size.

    With labels, the partition is drawn again until every validation fold and every
    training complement contains both classes.
    """
    if folds < 2:
        raise ConfigError(f"cross validation needs at least two folds, got {folds}")
    if n_rows < folds:
        raise DataError(f"cannot split {n_rows} rows into {folds} folds")

    rng = np.random.default_rng(seed)
    for _ in range(max_draws):
        permutation = rng.permutation(n_rows)
        blocks = [np.sort(block) for block in np.array_split(permutation, folds)]
        if labels is None or all(_has_both_classes(labels, block) for block in blocks):
            return blocks
    raise DataError(
        f"no fold partition with both classes in every fold after {max_draws} draws"
    )


def _has_both_classes(labels: np.ndarray, block: np.ndarray) -> bool:
    inside = labels[block]
    outside = np.delete(labels, block)
    return bool(
        inside.min() != inside.max() and outside.size and outside.min() != outside.max()
    )


def _score_fold(
    spec: LearnerSpec,
    X: np.ndarray,
    y: np.ndarray,
    days: np.ndarray,
    cell_ids: np.ndarray,
    validation: np.ndarray,
    prepare: Optional[Prepare],
    metric: Metric,
) -> float:
    training = np.setdiff1d(np.arange(len(y)), validation, assume_unique=True)
    X_train, y_train, weights = X[training], y[training], None
    if prepare is not None:
        X_train, y_train, weights = prepare(X_train, y_train)
    model = fit(spec, X_train, y_train, weights)
    scores = model.predict_proba(X[validation])
    return metric(y[validation], scores, days[validation], cell_ids[validation])


def cross_validation_scores(
    grid: Sequence[LearnerSpec],
    train: SpatioTemporalFrame,
    folds: int = 5,
    seed: int = 0,
    prepare: Optional[Prepare] = None,
    metric: Metric = ranking_auc,
    n_jobs: Optional[int] = 1,
) -> List[float]:
    """Get the mean validation metric of every spec of the grid.

    All specs are scored on the same fold partition. ``prepare`` is only ever applied
    to training folds.
    """
    if not grid:
        raise ConfigError("the hyperparameter grid is empty")
    X, y = train.xy()
    days = train.table["day"].to_numpy()
    cell_ids = train.table["cell_id"].to_numpy()
    blocks = fold_partition(len(y), folds, seed, labels=y)

    fold_scores = Parallel(n_jobs=n_jobs)(
        delayed(_score_fold)(spec, X, y, days, cell_ids, block, prepare, metric)
        for spec in grid
        for block in blocks
    )
    means = np.asarray(fold_scores, dtype=float).reshape(len(grid), folds).mean(axis=1)
    for spec, score in zip(grid, means):
        logger.debug(f"Cross validation score of {spec.describe()}: {score:.4f}")
    return means.tolist()


def cross_validate(
    grid: Sequence[LearnerSpec],
    train: SpatioTemporalFrame,
    folds: int = 5,
    seed: int = 0,
    prepare: Optional[Prepare] = None,
    metric: Metric = ranking_auc,
    n_jobs: Optional[int] = 1,
) -> LearnerSpec:
    """Select the spec with the best mean validation metric.

    Ties go to the spec listed first. A grid with a single spec is returned as is.
    """
    if not grid:
        raise ConfigError("the hyperparameter grid is empty")
    if len(grid) == 1:
        return grid[0]
    scores = cross_validation_scores(grid, train, folds, seed, prepare, metric, n_jobs)
    best = int(np.argmax(scores))
    logger.info(f"Selected {grid[best].describe()} with a score of {scores[best]:.4f}.")
    return grid[best]
