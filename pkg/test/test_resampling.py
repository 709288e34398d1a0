import math

import numpy as np
from pytest import mark, raises

from hyperspot.helpers import CannotBalanceError, ConfigError, DataError
from hyperspot.resampling import (
    ResampleMethod,
    ResampleSpec,
    interpolate,
    near_miss,
    near_miss_scores,
    random_over_sample,
    random_under_sample,
    random_under_sample_indices,
    resample,
    smote,
    standardize,
)


def imbalanced(n_majority: int = 20, n_minority: int = 4) -> tuple:
    """Create a two-feature data set with a small positive class."""
    rng = np.random.default_rng(1)
    X = np.concatenate(
        [rng.normal(0, 1, (n_majority, 2)), rng.normal(3, 1, (n_minority, 2))]
    )
    y = np.concatenate(
        [np.zeros(n_majority, dtype=int), np.ones(n_minority, dtype=int)]
    )
    return X, y


def test_random_under_sample_balances() -> None:
    """Test that all minority rows are kept with as many majority rows."""
    X, y = imbalanced()
    X_out, y_out = random_under_sample(X, y, seed=3)
    assert (y_out == 1).sum() == (y_out == 0).sum() == 4
    indices = random_under_sample_indices(y, seed=3)
    assert np.all(np.diff(indices) > 0)
    assert set(range(20, 24)) <= set(indices.tolist())
    assert np.array_equal(X_out, X[indices])


def test_random_under_sample_is_deterministic() -> None:
    """Test that the seed alone decides the draw."""
    _, y = imbalanced()
    first = random_under_sample_indices(y, seed=7)
    assert np.array_equal(first, random_under_sample_indices(y, seed=7))
    assert not np.array_equal(first, random_under_sample_indices(y, seed=8))


def test_random_under_sample_positive_majority() -> None:
    """Test that the smaller class is the minority whatever its label."""
    y = np.array([1, 1, 1, 0])
    indices = random_under_sample_indices(y, seed=0)
    assert len(indices) == 2
    assert 3 in indices


@mark.parametrize("labels", [[0, 0, 0], [1, 1], []])
def test_single_class_cannot_balance(labels: list) -> None:
    """Test that a single class input is rejected."""
    y = np.array(labels, dtype=int)
    X = np.zeros((len(y), 2))
    with raises(CannotBalanceError):
        random_under_sample(X, y)
    with raises(CannotBalanceError):
        smote(X, y)


def test_random_over_sample() -> None:
    """Test that duplicated minority rows follow the original rows."""
    X, y = imbalanced()
    X_out, y_out = random_over_sample(X, y, seed=0)
    assert len(y_out) == 40
    assert (y_out == 1).sum() == 20
    assert np.array_equal(X_out[:24], X)
    minority = [tuple(row) for row in X[20:24]]
    assert all(tuple(row) in minority for row in X_out[24:])


def test_interpolate() -> None:
    """Test points on the segment between two rows."""
    p = np.array([0.0, 0.0])
    r = np.array([2.0, 4.0])
    assert interpolate(p, r, 0.0).tolist() == [0.0, 0.0]
    assert interpolate(p, r, 0.5).tolist() == [1.0, 2.0]
    assert interpolate(p, r, 1.0).tolist() == [2.0, 4.0]


def test_smote_points_lie_on_segments() -> None:
    """Test that synthetic points stay within the minority bounding box."""
    X, y = imbalanced()
    X_out, y_out = smote(X, y, k=3, seed=2)
    assert len(y_out) == 40
    assert (y_out == 1).sum() == 20
    assert np.array_equal(X_out[:24], X)
    synthetic = X_out[24:]
    minority = X[20:]
    assert np.all(synthetic >= minority.min(axis=0) - 1e-12)
    assert np.all(synthetic <= minority.max(axis=0) + 1e-12)


def test_smote_single_minority_row() -> None:
    """Test that one minority row falls back to duplication unless strict."""
    X = np.array([[0.0], [1.0], [2.0], [5.0]])
    y = np.array([0, 0, 0, 1])
    X_out, y_out = smote(X, y, seed=0)
    assert y_out.tolist() == [0, 0, 0, 1, 1, 1]
    assert X_out[4:].tolist() == [[5.0], [5.0]]
    with raises(DataError):
        smote(X, y, strict=True)


def test_near_miss_tie_break() -> None:
    """Test that equal distances keep the lower row index."""
    X = np.array([[0.0, 0.0], [10.0, 0.0], [1.0, 0.0], [5.0, 0.0], [9.0, 0.0]])
    y = np.array([1, 1, 0, 0, 0])
    majority, scores = near_miss_scores(X, y, k=2, standardize_features=False)
    assert majority.tolist() == [2, 3, 4]
    assert scores.tolist() == [5.0, 5.0, 5.0]
    X_out, y_out = near_miss(X, y, k=2, standardize_features=False)
    assert X_out.tolist() == [[0.0, 0.0], [10.0, 0.0], [1.0, 0.0], [5.0, 0.0]]
    assert y_out.tolist() == [1, 1, 0, 0]


def test_near_miss_keeps_closest() -> None:
    """Test that the majority rows nearest to the minority survive."""
    X = np.array([[0.0], [1.0], [2.0], [8.0], [9.0], [10.0]])
    y = np.array([0, 0, 0, 0, 1, 1])
    X_out, y_out = near_miss(X, y, k=1)
    assert X_out[:, 0].tolist() == [2.0, 8.0, 9.0, 10.0]
    assert y_out.tolist() == [0, 0, 1, 1]


def test_standardize_constant_column() -> None:
    """Test that constant columns are centered but not scaled."""
    X = np.array([[1.0, 3.0], [3.0, 3.0]])
    assert standardize(X).tolist() == [[-1.0, 0.0], [1.0, 0.0]]


@mark.parametrize("method", list(ResampleMethod))
def test_resample_balances(method: ResampleMethod) -> None:
    """Test that every method returns balanced classes."""
    X, y = imbalanced()
    _, y_out = resample(ResampleSpec(method, k_neighbors=2, seed=5), X, y)
    assert (y_out == 1).sum() == (y_out == 0).sum()


def test_resample_spec_validation() -> None:
    """Test that the neighbor count must be positive."""
    with raises(ConfigError):
        ResampleSpec(ResampleMethod.SMOTE, k_neighbors=0)


def test_near_miss_matches_brute_force() -> None:
    """Test the kept rows against a recount of every majority-minority distance."""
    rng = np.random.default_rng(11)
    for _ in range(25):
        n_rows = int(rng.integers(6, 30))
        X = rng.normal(0, 1, (n_rows, 3))
        y = np.zeros(n_rows, dtype=int)
        y[rng.choice(n_rows, size=int(rng.integers(1, n_rows // 2)), replace=False)] = 1
        k = int(rng.integers(1, 4))

        minority = [i for i in range(n_rows) if y[i] == 1]
        scores = []
        for i in range(n_rows):
            if y[i] == 0:
                nearest = sorted(math.dist(X[i], X[j]) for j in minority)
                k_used = min(k, len(minority))
                scores.append((sum(nearest[:k_used]) / k_used, i))
        kept = [i for _, i in sorted(scores)[: len(minority)]]
        expected = sorted(minority + kept)

        X_out, _ = near_miss(X, y, k=k, standardize_features=False)
        assert np.array_equal(X_out, X[expected])


@mark.parametrize("method", list(ResampleMethod))
def test_resample_balances_random_inputs(method: ResampleMethod) -> None:
    """Test that every method balances randomly sized inputs exactly."""
    rng = np.random.default_rng(int(list(ResampleMethod).index(method)))
    for seed in range(20):
        n_rows = int(rng.integers(4, 60))
        X = rng.normal(0, 1, (n_rows, 2))
        y = np.zeros(n_rows, dtype=int)
        y[rng.choice(n_rows, size=int(rng.integers(1, n_rows // 2)), replace=False)] = 1
        _, y_out = resample(ResampleSpec(method, k_neighbors=3, seed=seed), X, y)
        assert (y_out == 1).sum() == (y_out == 0).sum()


def test_near_miss_positive_majority() -> None:
    """Test that NearMiss keeps every negative when the negatives are fewer."""
    X = np.array([[0.0], [1.0], [2.0], [8.0], [9.0], [10.0]])
    y = np.array([1, 1, 1, 1, 0, 0])
    X_out, y_out = near_miss(X, y, k=1)
    assert X_out[:, 0].tolist() == [2.0, 8.0, 9.0, 10.0]
    assert y_out.tolist() == [1, 1, 0, 0]
