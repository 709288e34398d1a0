import itertools
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from hyperspot.helpers import ArityError, CannotBalanceError, ConfigError, DataError


class LearnerKind(str, Enum):
    RANDOM_FOREST = "random_forest"
    ADABOOST = "adaboost"
    LOGISTIC_L1 = "logistic_l1"
    LOGISTIC_L2 = "logistic_l2"


DEFAULT_HYPERPARAMS: Dict[LearnerKind, Dict[str, Any]] = {
    LearnerKind.RANDOM_FOREST: {
        "n_trees": 100,
        "max_depth": None,
        "max_features": "sqrt",
        "bootstrap": True,
        "min_samples_leaf": 1,
    },
    LearnerKind.ADABOOST: {
        "n_estimators": 50,
        "learning_rate": 1.0,
        "max_depth": 1,
    },
    LearnerKind.LOGISTIC_L1: {"strength": 0.01, "tolerance": 1e-6, "max_iter": 10_000},
    LearnerKind.LOGISTIC_L2: {"strength": 0.01, "tolerance": 1e-6, "max_iter": 10_000},
}

# The hyperparameter grids searched by cross validation.
# None stands for an unlimited tree depth.
DEFAULT_GRIDS: Dict[LearnerKind, Dict[str, List[Any]]] = {
    LearnerKind.RANDOM_FOREST: {"n_trees": [100, 300], "max_depth": [8, 16, None]},
    LearnerKind.ADABOOST: {"n_estimators": [50, 100], "learning_rate": [0.1, 1.0]},
    LearnerKind.LOGISTIC_L1: {"strength": [0.001, 0.01, 0.1, 1.0]},
    LearnerKind.LOGISTIC_L2: {"strength": [0.001, 0.01, 0.1, 1.0]},
}


def parse_kind(value: str) -> LearnerKind:
    """Get the learner kind for a configuration value."""
    try:
        return LearnerKind(value.strip().lower().replace("-", "_"))
    except ValueError:
        known = ", ".join(kind.value for kind in LearnerKind)
        raise ConfigError(f"unknown learner '{value}', expected one of {known}")


def _is_int(value: Any) -> bool:
    return isinstance(value, (int, np.integer)) and not isinstance(value, bool)


def _check_hyperparams(kind: LearnerKind, params: Mapping[str, Any]) -> None:
    unknown = [name for name in params if name not in DEFAULT_HYPERPARAMS[kind]]
    if unknown:
        names = ", ".join(unknown)
        raise ConfigError(f"unknown hyperparameters for {kind.value}: {names}")

    def positive_int(name: str) -> None:
        value = params.get(name)
        if value is not None and (not _is_int(value) or value < 1):
            raise ConfigError(f"{name} must be a positive integer, got {value}")

    positive_int("n_trees")
    positive_int("n_estimators")
    positive_int("max_depth")
    positive_int("min_samples_leaf")
    positive_int("max_iter")
    if "learning_rate" in params and not params["learning_rate"] > 0:
        raise ConfigError(
            f"learning_rate must be positive, got {params['learning_rate']}"
        )
    if "strength" in params and not params["strength"] >= 0:
        raise ConfigError(f"strength must not be negative, got {params['strength']}")
    if "tolerance" in params and not params["tolerance"] > 0:
        raise ConfigError(f"tolerance must be positive, got {params['tolerance']}")
    max_features = params.get("max_features")
    if max_features is not None and max_features not in ("sqrt", "log2"):
        if not _is_int(max_features) or max_features < 1:
            raise ConfigError(f"invalid max_features '{max_features}'")


@dataclass(frozen=True)
class LearnerSpec:
    """A base learner kind with its hyperparameters and seed."""

    kind: LearnerKind
    hyperparams: Mapping[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        """Validate the hyperparameters."""
        object.__setattr__(self, "kind", LearnerKind(self.kind))
        object.__setattr__(self, "hyperparams", dict(self.hyperparams))
        _check_hyperparams(self.kind, self.hyperparams)

    @property
    def params(self) -> Dict[str, Any]:
        """The hyperparameters merged with the defaults of the kind."""
        merged = dict(DEFAULT_HYPERPARAMS[self.kind])
        merged.update(self.hyperparams)
        return merged

    def with_seed(self, seed: int) -> "LearnerSpec":
        """Get the same spec with another seed."""
        return replace(self, seed=int(seed))

    def describe(self) -> str:
        """Get a short human-readable description."""
        values = ", ".join(
            f"{name}={value}" for name, value in self.hyperparams.items()
        )
        return f"{self.kind.value}({values})"


def spec_grid(
    kind: LearnerKind,
    grid: Optional[Mapping[str, Sequence[Any]]] = None,
    seed: int = 0,
) -> List[LearnerSpec]:
    """Expand a hyperparameter grid into specs, varying the last name fastest."""
    grid = DEFAULT_GRIDS[kind] if grid is None else grid
    names = list(grid.keys())
    if not names:
        return [LearnerSpec(kind=kind, seed=seed)]
    return [
        LearnerSpec(kind=kind, hyperparams=dict(zip(names, values)), seed=seed)
        for values in itertools.product(*(grid[name] for name in names))
    ]


class LearnerModel(ABC):
    """A fitted base learner scoring the probability of the positive class."""

    def __init__(self, spec: LearnerSpec, feature_names: Sequence[str]) -> None:
        """Initialize the shared model metadata."""
        self.spec = spec
        self.feature_names: Tuple[str, ...] = tuple(feature_names)

    @property
    def kind(self) -> LearnerKind:
        """The kind of the learner."""
        return self.spec.kind

    @property
    def n_features(self) -> int:
        """The feature arity fixed at fit time."""
        return len(self.feature_names)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Score every row with the probability of the positive class."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ArityError(self.n_features, X.shape[1] if X.ndim == 2 else 1)
        return np.clip(self._predict(X), 0.0, 1.0)

    @abstractmethod
    def _predict(self, X: np.ndarray) -> np.ndarray:
        """Score the rows of a validated feature matrix."""

    @abstractmethod
    def arrays(self) -> Dict[str, np.ndarray]:
        """Get the fitted parameters as named arrays."""


def check_training_data(
    X: np.ndarray, y: np.ndarray, weights: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Validate a training set and default the sample weights to one."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).astype(np.int64)
    if X.ndim != 2:
        raise DataError("the feature matrix must be two-dimensional")
    if len(X) != len(y):
        raise DataError(f"got {len(X)} feature rows but {len(y)} labels")
    if len(y) < 2:
        raise DataError("training needs at least two rows")
    if not np.isin(y, (0, 1)).all():
        raise DataError("labels must be 0 or 1")
    if y.min() == y.max():
        raise DataError("training needs both classes")
    if not np.isfinite(X).all():
        raise DataError("the feature matrix contains non-finite values")

    if weights is None:
        weights = np.ones(len(y))
    weights = np.asarray(weights, dtype=float)
    if weights.shape != y.shape:
        raise DataError("there must be one sample weight per row")
    if (weights < 0).any() or not np.isfinite(weights).all():
        raise DataError("sample weights must be finite and non-negative")
    if weights.sum() <= 0:
        raise DataError("sample weights must not all be zero")
    return X, y, weights


def cost_weights(y: np.ndarray) -> np.ndarray:
    """Weight the minority class by the majority to minority ratio."""
    labels = np.asarray(y)
    positives = int((labels == 1).sum())
    negatives = labels.size - positives
    if positives == 0 or negatives == 0:
        raise CannotBalanceError("cost-sensitive weighting")
    minority_label = 1 if positives <= negatives else 0
    ratio = max(positives, negatives) / min(positives, negatives)
    return np.where(labels == minority_label, ratio, 1.0)
