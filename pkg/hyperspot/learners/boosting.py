from typing import Dict, List, Sequence

import numpy as np
from scipy.special import expit

from hyperspot import logger
from hyperspot.learners.base import LearnerModel, LearnerSpec
from hyperspot.learners.forest import trees_from_arrays, trees_to_arrays
from hyperspot.learners.tree import DecisionTree, grow_tree

# Lower bound of the weighted error, so that a perfect round gets a finite weight
MIN_ERROR = 1e-10


class AdaBoostModel(LearnerModel):
    """Discrete AdaBoost over weighted trees.

    The probability is the logistic transform ``expit(2 F(x))`` of the weighted margin
    ``F(x) = sum(alpha_m * h_m(x))`` with ``h_m`` in {-1, +1}.
    """

    def __init__(
        self,
        spec: LearnerSpec,
        feature_names: Sequence[str],
        trees: List[DecisionTree],
        alphas: np.ndarray,
        errors: np.ndarray,
    ) -> None:
        """Create a boosted model from fitted rounds."""
        super().__init__(spec, feature_names)
        self.trees = trees
        self.alphas = np.asarray(alphas, dtype=float)
        self.errors = np.asarray(errors, dtype=float)

    def margin(self, X: np.ndarray) -> np.ndarray:
        """Get the weighted vote of the weak learners."""
        margin = np.zeros(len(X))
        for tree, alpha in zip(self.trees, self.alphas):
            margin += alpha * np.where(tree.predict(X) > 0.5, 1.0, -1.0)
        return margin

    def _predict(self, X: np.ndarray) -> np.ndarray:
        return expit(2 * self.margin(X))

    def arrays(self) -> Dict[str, np.ndarray]:
        """Get the rounds as flat arrays."""
        arrays = trees_to_arrays(self.trees) if self.trees else {}
        arrays["alphas"] = self.alphas
        arrays["errors"] = self.errors
        return arrays

    @classmethod
    def from_arrays(
        cls,
        spec: LearnerSpec,
        feature_names: Sequence[str],
        arrays: Dict[str, np.ndarray],
    ) -> "AdaBoostModel":
        """Restore a boosted model from its arrays."""
        trees = trees_from_arrays(arrays) if "tree_offsets" in arrays else []
        return cls(spec, feature_names, trees, arrays["alphas"], arrays["errors"])


def fit_adaboost(
    spec: LearnerSpec,
    X: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray,
    feature_names: Sequence[str],
) -> AdaBoostModel:
    """Fit AdaBoost; the initial distribution is proportional to the sample weights.

    Boosting stops early when a weak learner's weighted error reaches 0.5, or after a
    round without errors.
    """
    params = spec.params
    rng = np.random.default_rng(spec.seed)
    signs = np.where(y == 1, 1.0, -1.0)
    distribution = weights / weights.sum()

    trees: List[DecisionTree] = []
    alphas: List[float] = []
    errors: List[float] = []
    for round_index in range(params["n_estimators"]):
        tree = grow_tree(X, y, distribution, max_depth=params["max_depth"], rng=rng)
        votes = np.where(tree.predict(X) > 0.5, 1.0, -1.0)
        error = float(distribution[votes != signs].sum())
        if error >= 0.5:
            logger.debug(
                f"AdaBoost stopped after {round_index} rounds, "
                f"weighted error {error:.3f}."
            )
            break

        alpha = params["learning_rate"] * 0.5 * np.log(
            (1 - max(error, MIN_ERROR)) / max(error, MIN_ERROR)
        )
        trees.append(tree)
        alphas.append(float(alpha))
        errors.append(error)
        if error == 0:
            break

        distribution = distribution * np.exp(-alpha * signs * votes)
        distribution /= distribution.sum()

    return AdaBoostModel(spec, feature_names, trees, np.array(alphas), np.array(errors))
