"""Base learners scoring the probability of an event in a (cell, bucket) row."""
from typing import Optional, Sequence

import numpy as np

from hyperspot.helpers import ArityError
from hyperspot.learners.base import (
    LearnerKind,
    LearnerModel,
    LearnerSpec,
    check_training_data,
    cost_weights,
    parse_kind,
    spec_grid,
)
from hyperspot.learners.boosting import AdaBoostModel, fit_adaboost
from hyperspot.learners.forest import RandomForestModel, fit_forest
from hyperspot.learners.logistic import LogisticModel, fit_logistic

__all__ = [
    "AdaBoostModel",
    "LearnerKind",
    "LearnerModel",
    "LearnerSpec",
    "LogisticModel",
    "RandomForestModel",
    "cost_weights",
    "fit",
    "parse_kind",
    "predict_proba",
    "spec_grid",
]


def fit(
    spec: LearnerSpec,
    X: np.ndarray,
    y: np.ndarray,
    weights: Optional[np.ndarray] = None,
    feature_names: Optional[Sequence[str]] = None,
    n_jobs: Optional[int] = 1,
) -> LearnerModel:
    """Fit the learner of a spec; the result only depends on the spec seed."""
    X, y, weights = check_training_data(X, y, weights)
    if feature_names is None:
        feature_names = [f"x{column}" for column in range(X.shape[1])]
    if len(feature_names) != X.shape[1]:
        raise ArityError(len(feature_names), X.shape[1])

    if spec.kind == LearnerKind.RANDOM_FOREST:
        return fit_forest(spec, X, y, weights, feature_names, n_jobs=n_jobs)
    if spec.kind == LearnerKind.ADABOOST:
        return fit_adaboost(spec, X, y, weights, feature_names)
    return fit_logistic(spec, X, y, weights, feature_names)


def predict_proba(model: LearnerModel, X: np.ndarray) -> np.ndarray:
    """Score every row of X with the probability of the positive class."""
    return model.predict_proba(X)
