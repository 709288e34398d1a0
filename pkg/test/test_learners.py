import os

import numpy as np
from pytest import approx, mark, raises
from scipy.optimize import approx_fprime

from hyperspot.helpers import ArityError, ConfigError, DataError
from hyperspot.learners import (
    AdaBoostModel,
    LearnerKind,
    LearnerSpec,
    LogisticModel,
    RandomForestModel,
    cost_weights,
    fit,
    parse_kind,
    predict_proba,
    spec_grid,
)
from hyperspot.learners.forest import SEED_BOUND
from hyperspot.learners.logistic import L1, L2, loss_and_gradient, soft_threshold
from hyperspot.learners.serialization import load_model, save_model
from hyperspot.learners.tree import grow_tree

XOR_X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
XOR_Y = np.array([0, 1, 1, 0])


def noisy_line(n: int = 200, seed: int = 0, threshold: float = 0.8) -> tuple:
    """Create rows whose label becomes more likely with the first feature."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 3))
    y = (X[:, 0] + 0.5 * rng.normal(size=n) > threshold).astype(int)
    return X, y


def accuracy(scores: np.ndarray, y: np.ndarray) -> float:
    """Get the share of rows classified correctly at the 0.5 threshold."""
    return float(((scores > 0.5).astype(int) == y).mean())


@mark.parametrize(
    "value,expected",
    [
        ("random_forest", LearnerKind.RANDOM_FOREST),
        ("Random-Forest", LearnerKind.RANDOM_FOREST),
        ("adaboost", LearnerKind.ADABOOST),
        (" logistic_l1 ", LearnerKind.LOGISTIC_L1),
    ],
)
def test_parse_kind(value: str, expected: LearnerKind) -> None:
    """Test that learner names are normalized."""
    assert parse_kind(value) == expected


def test_parse_unknown_kind() -> None:
    """Test that unknown learners are a configuration error."""
    with raises(ConfigError):
        parse_kind("svm")


@mark.parametrize(
    "kind,hyperparams",
    [
        (LearnerKind.RANDOM_FOREST, {"n_trees": 0}),
        (LearnerKind.RANDOM_FOREST, {"max_features": "half"}),
        (LearnerKind.ADABOOST, {"learning_rate": 0}),
        (LearnerKind.LOGISTIC_L2, {"strength": -1.0}),
        (LearnerKind.LOGISTIC_L1, {"n_trees": 10}),
    ],
)
def test_invalid_hyperparams(kind: LearnerKind, hyperparams: dict) -> None:
    """Test that invalid hyperparameters are rejected."""
    with raises(ConfigError):
        LearnerSpec(kind=kind, hyperparams=hyperparams)


def test_spec_grid_order() -> None:
    """Test that the grid varies the last hyperparameter fastest."""
    grid = spec_grid(
        LearnerKind.ADABOOST, {"n_estimators": [50, 100], "learning_rate": [0.1, 1.0]}
    )
    assert [spec.hyperparams for spec in grid] == [
        {"n_estimators": 50, "learning_rate": 0.1},
        {"n_estimators": 50, "learning_rate": 1.0},
        {"n_estimators": 100, "learning_rate": 0.1},
        {"n_estimators": 100, "learning_rate": 1.0},
    ]
    assert len(spec_grid(LearnerKind.RANDOM_FOREST)) == 6


def test_cost_weights() -> None:
    """Test that the minority class is weighted by the imbalance ratio."""
    assert cost_weights(np.array([0, 0, 0, 1])).tolist() == [1.0, 1.0, 1.0, 3.0]
    assert cost_weights(np.array([1, 1, 0])).tolist() == [1.0, 1.0, 2.0]


@mark.parametrize(
    "kind,hyperparams",
    [
        (
            LearnerKind.RANDOM_FOREST,
            {"n_trees": 1, "max_depth": 2, "bootstrap": False, "max_features": None},
        ),
        (LearnerKind.LOGISTIC_L2, {}),
        (LearnerKind.LOGISTIC_L1, {}),
    ],
)
def test_cost_weights_raise_minority_scores(
    kind: LearnerKind, hyperparams: dict
) -> None:
    """Test that cost weighting flags more rows than training on the raw imbalance."""
    X, y = noisy_line(400, seed=2, threshold=1.5)
    spec = LearnerSpec(kind, hyperparams)
    plain = fit(spec, X, y).predict_proba(X)
    weighted = fit(spec, X, y, cost_weights(y)).predict_proba(X)
    assert weighted[y == 1].mean() > plain[y == 1].mean()
    assert (weighted > 0.5).sum() > (plain > 0.5).sum()


@mark.parametrize(
    "X,y",
    [
        (np.zeros((3, 1)), np.array([0, 0, 0])),
        (np.array([[0.0], [np.nan]]), np.array([0, 1])),
        (np.zeros((3, 1)), np.array([0, 1])),
        (np.zeros((2, 1)), np.array([0, 2])),
    ],
)
def test_fit_rejects_invalid_data(X: np.ndarray, y: np.ndarray) -> None:
    """Test that training data must be finite, binary and contain both classes."""
    with raises(DataError):
        fit(LearnerSpec(LearnerKind.LOGISTIC_L2), X, y)


def test_tree_solves_xor() -> None:
    """Test that a depth-2 tree separates XOR and a stump cannot."""
    weights = np.ones(4)
    deep = grow_tree(XOR_X, XOR_Y, weights, max_depth=2)
    assert deep.predict(XOR_X).tolist() == [0.0, 1.0, 1.0, 0.0]
    assert deep.depth == 2
    stump = grow_tree(XOR_X, XOR_Y, weights, max_depth=1)
    assert accuracy(stump.predict(XOR_X), XOR_Y) <= 0.75


def test_tree_threshold_sends_ties_left() -> None:
    """Test that a row equal to the threshold goes to the left child."""
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    tree = grow_tree(X, np.array([0, 0, 1, 1]), np.ones(4))
    assert tree.threshold[0] == 1.5
    assert tree.predict(np.array([[1.5], [1.6]])).tolist() == [0.0, 1.0]


@mark.parametrize("max_depth,expected", [(2, 1.0), (1, 0.75)])
def test_forest_xor(max_depth: int, expected: float) -> None:
    """Test the training accuracy of forests on XOR."""
    spec = LearnerSpec(
        LearnerKind.RANDOM_FOREST,
        {
            "n_trees": 10,
            "max_depth": max_depth,
            "bootstrap": False,
            "max_features": None,
        },
    )
    model = fit(spec, XOR_X, XOR_Y)
    if max_depth == 2:
        assert accuracy(model.predict_proba(XOR_X), XOR_Y) == expected
    else:
        assert accuracy(model.predict_proba(XOR_X), XOR_Y) <= expected


def test_single_tree_forest_equals_its_tree() -> None:
    """Test that one tree on all rows and features is the tree grown directly."""
    X, y = noisy_line()
    spec = LearnerSpec(
        LearnerKind.RANDOM_FOREST,
        {"n_trees": 1, "bootstrap": False, "max_features": None},
        seed=3,
    )
    model = fit(spec, X, y)
    seed = np.random.default_rng(3).integers(0, SEED_BOUND, size=1)[0]
    tree = grow_tree(X, y, np.ones(len(y)), rng=np.random.default_rng(int(seed)))
    assert np.array_equal(model.predict_proba(X), tree.predict(X))


def test_forest_is_deterministic() -> None:
    """Test that the forest only depends on its seed, not on the job count."""
    X, y = noisy_line()
    spec = LearnerSpec(LearnerKind.RANDOM_FOREST, {"n_trees": 8}, seed=4)
    single = fit(spec, X, y, n_jobs=1).predict_proba(X)
    parallel = fit(spec, X, y, n_jobs=2).predict_proba(X)
    assert np.array_equal(single, parallel)
    other = fit(spec.with_seed(5), X, y).predict_proba(X)
    assert not np.array_equal(single, other)


def test_forest_probabilities_rank_positives_first() -> None:
    """Test that positives score higher than negatives on average."""
    X, y = noisy_line()
    model = fit(LearnerSpec(LearnerKind.RANDOM_FOREST, {"n_trees": 20}), X, y)
    scores = predict_proba(model, X)
    assert isinstance(model, RandomForestModel)
    assert scores[y == 1].mean() > scores[y == 0].mean()
    assert np.all((scores >= 0) & (scores <= 1))


def test_adaboost_separable_data_stops_early() -> None:
    """Test that a round without errors ends the boosting."""
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0, 0, 1, 1])
    model = fit(LearnerSpec(LearnerKind.ADABOOST, {"n_estimators": 10}), X, y)
    assert isinstance(model, AdaBoostModel)
    assert len(model.trees) == 1
    scores = model.predict_proba(X)
    assert np.all(scores[:2] < 0.01)
    assert np.all(scores[2:] > 0.99)


def test_adaboost_weak_learners_stop_at_half_error() -> None:
    """Test that stumps on XOR stop the boosting before the first round."""
    model = fit(LearnerSpec(LearnerKind.ADABOOST, {"n_estimators": 10}), XOR_X, XOR_Y)
    assert len(model.trees) == 0
    assert model.predict_proba(XOR_X).tolist() == [0.5] * 4


def test_adaboost_learns_noisy_data() -> None:
    """Test that boosted stumps separate the classes on average."""
    X, y = noisy_line()
    model = fit(LearnerSpec(LearnerKind.ADABOOST, {"n_estimators": 20}), X, y)
    scores = model.predict_proba(X)
    assert scores[y == 1].mean() > scores[y == 0].mean()
    assert np.all(model.errors < 0.5)


@mark.parametrize("penalty,strength", [(L2, 0.1), (L1, 0.05), (L2, 0.0)])
def test_loss_gradient_matches_finite_differences(
    penalty: str, strength: float
) -> None:
    """Test the analytic gradient against a numerical one away from zero weights."""
    X, y = noisy_line(50)
    weights = np.linspace(0.5, 2.0, 50)
    params = np.array([0.3, -0.7, 0.4, 1.1])

    def loss(values: np.ndarray) -> float:
        return loss_and_gradient(values, X, y, weights, strength, penalty)[0]

    _, gradient = loss_and_gradient(params, X, y, weights, strength, penalty)
    numeric = approx_fprime(params, loss, 1e-7)
    assert gradient == approx(numeric, abs=1e-5)


def test_soft_threshold() -> None:
    """Test that values shrink towards zero and small values vanish."""
    values = np.array([-2.0, -0.5, 0.0, 0.5, 2.0])
    assert soft_threshold(values, 1.0).tolist() == [-1.0, 0.0, 0.0, 0.0, 1.0]


@mark.parametrize("kind", [LearnerKind.LOGISTIC_L1, LearnerKind.LOGISTIC_L2])
def test_logistic_learns_direction(kind: LearnerKind) -> None:
    """Test that the informative feature gets the largest positive weight."""
    X, y = noisy_line()
    model = fit(LearnerSpec(kind, {"strength": 0.001}), X, y)
    assert isinstance(model, LogisticModel)
    assert int(np.argmax(np.abs(model.coef))) == 0
    assert model.coef[0] > 0
    assert accuracy(model.predict_proba(X), y) > 0.8


def test_strong_l1_penalty_zeroes_weights() -> None:
    """Test that a large L1 strength leaves only the intercept."""
    X, y = noisy_line()
    model = fit(LearnerSpec(LearnerKind.LOGISTIC_L1, {"strength": 10.0}), X, y)
    assert np.all(model.coef == 0)
    assert model.predict_proba(X[:3]) == approx([y.mean()] * 3, abs=1e-4)


def test_predict_checks_arity() -> None:
    """Test that the feature count is fixed at fit time."""
    X, y = noisy_line()
    model = fit(LearnerSpec(LearnerKind.LOGISTIC_L2), X, y)
    with raises(ArityError):
        model.predict_proba(X[:, :2])


def test_feature_names_must_match_columns() -> None:
    """Test that one name per column is required."""
    X, y = noisy_line()
    with raises(ArityError):
        fit(LearnerSpec(LearnerKind.LOGISTIC_L2), X, y, feature_names=["a", "b"])


@mark.parametrize(
    "spec",
    [
        LearnerSpec(
            LearnerKind.RANDOM_FOREST, {"n_trees": 5, "max_depth": None}, seed=2
        ),
        LearnerSpec(LearnerKind.ADABOOST, {"n_estimators": 5}),
        LearnerSpec(LearnerKind.LOGISTIC_L1, {"strength": 0.01}),
    ],
)
def test_saved_model_predicts_the_same(spec: LearnerSpec, tmp_path: str) -> None:
    """Test that a model read back from disk scores rows identically."""
    X, y = noisy_line()
    model = fit(spec, X, y, feature_names=["a", "b", "c"])
    path = os.path.join(tmp_path, "model.npz")
    save_model(model, path)
    restored = load_model(path)
    assert restored.spec == model.spec
    assert restored.feature_names == ("a", "b", "c")
    assert np.array_equal(restored.predict_proba(X), model.predict_proba(X))


def test_load_model_missing_file(tmp_path: str) -> None:
    """Test that unreadable model files are a data error."""
    with raises(DataError):
        load_model(os.path.join(tmp_path, "missing.npz"))
