"""Weighted CART trees with binary threshold splits on the Gini impurity."""
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np

LEAF = -1

MaxFeatures = Union[None, str, int]


@dataclass(frozen=True, eq=False)
class DecisionTree:
    """A fitted tree in flat-array form.

    Node 0 is the root. Inner nodes send a row to ``left`` when its value of
    ``feature`` is at most ``threshold``; leaves have ``feature == LEAF`` and hold the
    weighted frequency of the positive class in ``value``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        """The number of nodes of the tree."""
        return self.feature.size

    @property
    def depth(self) -> int:
        """The length of the longest root to leaf path."""
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for node in range(self.n_nodes):
            if self.feature[node] != LEAF:
                depths[self.left[node]] = depths[node] + 1
                depths[self.right[node]] = depths[node] + 1
        return int(depths.max())

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Get the leaf value of every row."""
        nodes = np.zeros(len(X), dtype=np.int64)
        active = np.flatnonzero(self.feature[nodes] != LEAF)
        while active.size:
            current = nodes[active]
            goes_left = X[active, self.feature[current]] <= self.threshold[current]
            nodes[active] = np.where(goes_left, self.left[current], self.right[current])
            active = active[self.feature[nodes[active]] != LEAF]
        return self.value[nodes]


def n_split_features(max_features: MaxFeatures, n_features: int) -> int:
    """Get the number of features to consider per split."""
    if max_features is None:
        return n_features
    if max_features == "sqrt":
        return max(1, int(math.sqrt(n_features)))
    if max_features == "log2":
        return max(1, int(math.log2(n_features)))
    return max(1, min(int(max_features), n_features))


def _best_split_on(
    values: np.ndarray,
    weights: np.ndarray,
    positive_weights: np.ndarray,
    min_samples_leaf: int,
) -> Optional[Tuple[float, float]]:
    """Find the best threshold of a single feature.

    Returns the weighted child impurity and the threshold, or None without a valid
    split.
    """
    order = np.argsort(values, kind="stable")
    sorted_values = values[order]
    cum_weight = np.cumsum(weights[order])
    cum_positive = np.cumsum(positive_weights[order])
    total_weight = cum_weight[-1]
    total_positive = cum_positive[-1]

    left_weight = cum_weight[:-1]
    left_positive = cum_positive[:-1]
    right_weight = total_weight - left_weight
    right_positive = total_positive - left_positive

    n_left = np.arange(1, values.size)
    valid = (
        (sorted_values[:-1] < sorted_values[1:])
        & (n_left >= min_samples_leaf)
        & (values.size - n_left >= min_samples_leaf)
        & (left_weight > 0)
        & (right_weight > 0)
    )
    if not valid.any():
        return None

    with np.errstate(divide="ignore", invalid="ignore"):
        # Weight times Gini impurity: w * 2p(1-p) = 2 * w_pos * (w - w_pos) / w
        left_gini = 2 * left_positive * (left_weight - left_positive) / left_weight
        right_gini = 2 * right_positive * (right_weight - right_positive) / right_weight
    impurity = np.where(valid, (left_gini + right_gini) / total_weight, np.inf)
    position = int(np.argmin(impurity))

    low, high = sorted_values[position], sorted_values[position + 1]
    threshold = (low + high) / 2
    if not low <= threshold < high:
        threshold = low
    return float(impurity[position]), float(threshold)


def grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray,
    max_depth: Optional[int] = None,
    max_features: MaxFeatures = None,
    min_samples_leaf: int = 1,
    rng: Optional[np.random.Generator] = None,
) -> DecisionTree:
    """Grow a tree on weighted data.

    A node is split as long as it is impure, the depth limit allows it and a valid
    split exists. Per split, a random subset of ``max_features`` features is searched
    first; the remaining features are only tried when none of them can split.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    n_features = X.shape[1]
    n_try = n_split_features(max_features, n_features)
    positive_weights = weights * (y == 1)

    feature: List[int] = []
    threshold: List[float] = []
    left: List[int] = []
    right: List[int] = []
    value: List[float] = []

    def add_node(rows: np.ndarray) -> int:
        total = weights[rows].sum()
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(positive_weights[rows].sum() / total) if total > 0 else 0.0)
        return len(feature) - 1

    root = add_node(np.arange(len(y)))
    stack = [(root, np.arange(len(y)), 0)]
    while stack:
        node, rows, depth = stack.pop()
        if max_depth is not None and depth >= max_depth:
            continue
        if rows.size < 2 * min_samples_leaf or value[node] in (0.0, 1.0):
            continue

        candidates = rng.permutation(n_features)
        best: Optional[Tuple[float, int, float]] = None
        for position, candidate in enumerate(candidates):
            if position >= n_try and best is not None:
                break
            split = _best_split_on(
                X[rows, candidate],
                weights[rows],
                positive_weights[rows],
                min_samples_leaf,
            )
            if split is not None and (best is None or split[0] < best[0]):
                best = (split[0], int(candidate), split[1])
        if best is None:
            continue

        _, split_feature, split_threshold = best
        goes_left = X[rows, split_feature] <= split_threshold
        left_node = add_node(rows[goes_left])
        right_node = add_node(rows[~goes_left])
        feature[node] = split_feature
        threshold[node] = split_threshold
        left[node] = left_node
        right[node] = right_node
        stack.append((right_node, rows[~goes_left], depth + 1))
        stack.append((left_node, rows[goes_left], depth + 1))

    return DecisionTree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=float),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value, dtype=float),
    )
