from typing import Dict, List, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from hyperspot.learners.base import LearnerModel, LearnerSpec
from hyperspot.learners.tree import DecisionTree, grow_tree

SEED_BOUND = 2 ** 63 - 1


class RandomForestModel(LearnerModel):
    """Bagged trees; the probability is the mean of the leaf frequencies (soft vote)."""

    def __init__(
        self, spec: LearnerSpec, feature_names: Sequence[str], trees: List[DecisionTree]
    ) -> None:
        """Create a forest from fitted trees."""
        super().__init__(spec, feature_names)
        self.trees = trees

    def _predict(self, X: np.ndarray) -> np.ndarray:
        return np.mean([tree.predict(X) for tree in self.trees], axis=0)

    def arrays(self) -> Dict[str, np.ndarray]:
        """Get the trees, concatenated, with the node offset of every tree."""
        return trees_to_arrays(self.trees)

    @classmethod
    def from_arrays(
        cls,
        spec: LearnerSpec,
        feature_names: Sequence[str],
        arrays: Dict[str, np.ndarray],
    ) -> "RandomForestModel":
        """Restore a forest from its arrays."""
        return cls(spec, feature_names, trees_from_arrays(arrays))


def trees_to_arrays(trees: Sequence[DecisionTree]) -> Dict[str, np.ndarray]:
    """Concatenate trees into flat arrays."""
    offsets = np.cumsum([0] + [tree.n_nodes for tree in trees]).astype(np.int64)
    return {
        "tree_offsets": offsets,
        "feature": np.concatenate([tree.feature for tree in trees]),
        "threshold": np.concatenate([tree.threshold for tree in trees]),
        "left": np.concatenate([tree.left for tree in trees]),
        "right": np.concatenate([tree.right for tree in trees]),
        "value": np.concatenate([tree.value for tree in trees]),
    }


def trees_from_arrays(arrays: Dict[str, np.ndarray]) -> List[DecisionTree]:
    """Split flat arrays back into trees."""
    offsets = arrays["tree_offsets"]
    return [
        DecisionTree(
            feature=arrays["feature"][start:end],
            threshold=arrays["threshold"][start:end],
            left=arrays["left"][start:end],
            right=arrays["right"][start:end],
            value=arrays["value"][start:end],
        )
        for start, end in zip(offsets[:-1], offsets[1:])
    ]


def _grow_member(
    X: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray,
    params: Dict,
    seed: int,
) -> DecisionTree:
    rng = np.random.default_rng(seed)
    if params["bootstrap"]:
        draws = np.bincount(rng.integers(0, len(y), size=len(y)), minlength=len(y))
        rows = np.flatnonzero(draws)
        return grow_tree(
            X[rows],
            y[rows],
            weights[rows] * draws[rows],
            max_depth=params["max_depth"],
            max_features=params["max_features"],
            min_samples_leaf=params["min_samples_leaf"],
            rng=rng,
        )
    return grow_tree(
        X,
        y,
        weights,
        max_depth=params["max_depth"],
        max_features=params["max_features"],
        min_samples_leaf=params["min_samples_leaf"],
        rng=rng,
    )


def fit_forest(
    spec: LearnerSpec,
    X: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray,
    feature_names: Sequence[str],
    n_jobs: Optional[int] = 1,
) -> RandomForestModel:
    """Fit a random forest; the tree seeds are drawn up front from the spec seed."""
    params = spec.params
    seeds = np.random.default_rng(spec.seed).integers(
        0, SEED_BOUND, size=params["n_trees"]
    )
    trees = Parallel(n_jobs=n_jobs)(
        delayed(_grow_member)(X, y, weights, params, int(seed)) for seed in seeds
    )
    return RandomForestModel(spec, feature_names, list(trees))
