import json
import os
from dataclasses import replace
from datetime import date, timedelta
from typing import Any, Dict

import numpy as np
import pandas as pd
import toml
from pytest import fixture, mark, raises

from hyperspot import logger
from hyperspot.config import ExperimentConfig, MatrixConfig, StrataConfig
from hyperspot.dataset import EventRecord, GridSpec, SpatioTemporalFrame, build_frame
from hyperspot.evaluation import budget, evaluate_scores
from hyperspot.helpers import ArityError, ConfigError, DataError, StageError
from hyperspot.pipeline import (
    ExperimentResult,
    Predictor,
    compare,
    evaluate_experiment,
    hotspots_geojson,
    load_predictor,
    run_experiment,
    run_matrix,
    save_predictor,
    stratum_cells,
    train_experiment,
    tune,
)
from hyperspot.synthgen import SynthConfig, generate, write_dataset

AREA = SynthConfig(
    width_cells=20, height_cells=20, days=200, target_fraction=0.002, seed=4
)

slow = mark.skipif(
    os.environ.get("HYPERSPOT_SLOW") != "1", reason="set HYPERSPOT_SLOW=1 to run"
)


@fixture(scope="module")
def manifest(tmp_path_factory: Any) -> str:
    """Write a small synthetic study area and get its experiment manifest."""
    directory = str(tmp_path_factory.mktemp("area"))
    write_dataset(generate(AREA), directory)
    return os.path.join(directory, "experiment.toml")


def experiment(manifest: str, output: str, **flags: Any) -> ExperimentConfig:
    """Resolve the manifest with a fast learner and the given flag overrides."""
    overrides: Dict[str, Any] = {"learner": "logistic_l2", "plot": False}
    if flags.get("strategy") is None:
        overrides["phi"] = 3
    overrides.update(flags, output=output)
    return ExperimentConfig.from_file(manifest, overrides=overrides)


@fixture(scope="module")
def hyper_run(manifest: str, tmp_path_factory: Any) -> ExperimentResult:
    """Run the hyper-ensemble experiment once for all tests."""
    output = str(tmp_path_factory.mktemp("runs"))
    return run_experiment(experiment(manifest, output, plot=True))


def test_run_writes_outputs(hyper_run: ExperimentResult) -> None:
    """Test that a run writes the model, the reports and the daily hotspots."""
    for name in (
        "model.npz",
        "run.toml",
        "metrics.csv",
        "surveillance.csv",
        "surveillance.svg",
        "daily_hit_rates.csv",
    ):
        assert os.path.exists(os.path.join(hyper_run.run_dir, name))
    assert os.path.basename(hyper_run.run_dir) == "hyper"

    metrics = pd.read_csv(os.path.join(hyper_run.run_dir, "metrics.csv"))
    assert metrics["coverage"].tolist() == [0.05, 0.1, 0.2]
    assert (metrics["strategy"] == "hyper").all()
    assert (metrics["base_learner"] == "logistic_l2").all()
    curve = pd.read_csv(os.path.join(hyper_run.run_dir, "surveillance.csv"))
    assert len(curve) == 100


def test_run_hotspot_files(hyper_run: ExperimentResult) -> None:
    """Test that every test day gets the top cells of the largest coverage level."""
    test = hyper_run.runs[""].split.test
    directory = os.path.join(hyper_run.run_dir, "hotspots")
    files = sorted(os.listdir(directory))
    assert len(files) == test.days.size
    assert files[0] == f"{test.bucket_date(test.days.min()).isoformat()}.csv"

    hotspots = pd.read_csv(os.path.join(directory, files[0]))
    assert list(hotspots.columns) == ["rank", "cell_id", "score", "x", "y"]
    assert len(hotspots) == budget(0.2, test.cells.size)
    assert hotspots["rank"].tolist() == list(range(1, len(hotspots) + 1))
    assert hotspots["score"].is_monotonic_decreasing


def test_run_reports_sensible_metrics(hyper_run: ExperimentResult) -> None:
    """Test that the hit rates grow with the coverage and the AUC is valid."""
    report = hyper_run.reports[""]
    rates = [report.hit_rates[level] for level in report.levels]
    assert rates == sorted(rates)
    assert 0 < report.auc < 1
    assert report.pai[0.05] == report.hit_rates[0.05] / 0.05


def test_run_does_not_leak(hyper_run: ExperimentResult) -> None:
    """Test that no stage before evaluation read a test bucket."""
    trained = hyper_run.runs[""]
    assert trained.audit.leaks(trained.split.boundary_day) == []
    assert trained.split.train.table["day"].max() < trained.split.boundary_day
    assert trained.split.test.table["day"].min() == trained.split.boundary_day


def test_run_manifest_reproduces_config(
    manifest: str, hyper_run: ExperimentResult
) -> None:
    """Test that the written run.toml resolves to the configuration of the run."""
    written = toml.load(os.path.join(hyper_run.run_dir, "run.toml"))
    assert written["Run"]["strategy"] == "hyper"
    assert written["Run"]["boundary_day"] == hyper_run.runs[""].split.boundary_day
    config = experiment(manifest, os.path.dirname(hyper_run.run_dir), plot=True)
    assert ExperimentConfig.from_mapping(written) == config


def test_train_then_evaluate_matches_run(
    manifest: str, hyper_run: ExperimentResult, tmp_path: str
) -> None:
    """Test that separate train and evaluate stages reproduce a full run."""
    config = experiment(manifest, str(tmp_path), plot=True)
    trained = train_experiment(config)
    assert os.path.exists(os.path.join(trained.run_dir, "model.npz"))
    assert trained.reports == {}

    evaluated = evaluate_experiment(config)
    expected = hyper_run.reports[""]
    actual = evaluated.reports[""]
    assert actual.auc == expected.auc
    assert actual.hit_rates == expected.hit_rates
    for name in ("metrics.csv", "surveillance.csv", "daily_hit_rates.csv"):
        contents = []
        for result in (hyper_run, evaluated):
            with open(os.path.join(result.run_dir, name), "rb") as file:
                contents.append(file.read())
        assert contents[0] == contents[1]


def test_evaluate_without_model(manifest: str, tmp_path: str) -> None:
    """Test that evaluating before training fails in the split stage."""
    with raises(StageError) as error:
        evaluate_experiment(experiment(manifest, str(tmp_path)))
    assert error.value.stage == "split"
    assert isinstance(error.value.cause, DataError)


def test_compare_runs(
    manifest: str, hyper_run: ExperimentResult, tmp_path: str
) -> None:
    """Test the paired comparison of two runs over the same test days."""
    majority = run_experiment(experiment(manifest, str(tmp_path), strategy="majority"))
    assert majority.runs[""].predictor.model is None
    table = compare(hyper_run.run_dir, majority.run_dir)
    assert list(table.columns) == ["coverage", "mean_difference", "t", "df", "p"]
    assert table["coverage"].tolist() == [0.05, 0.1, 0.2]
    assert table["p"].between(0, 1).all()

    same = compare(hyper_run.run_dir, hyper_run.run_dir)
    assert (same["t"] == 0).all()
    assert (same["p"] == 0.5).all()


def uniform_events_frame(cells: range, seed: int) -> SpatioTemporalFrame:
    """Create 500 cells over 100 days with 25 events a day on random given cells."""
    rng = np.random.default_rng(seed)
    grid = GridSpec(10.0, (0.0, 0.0), 25, 20, np.ones(500, dtype=bool))
    start = date(2016, 1, 1)
    events = [
        EventRecord((cell % 25) * 10 + 5, (cell // 25) * 10 + 5, start + timedelta(day))
        for day in range(100)
        for cell in rng.choice(cells, size=25, replace=False).tolist()
    ]
    return build_frame(grid, events, (start, start + timedelta(99)))


def test_majority_hit_rate_stays_at_coverage() -> None:
    """Test that scoring everything 0 captures no more than the covered share."""
    majority = Predictor("majority", ())
    frame = uniform_events_frame(range(500), seed=1)
    scores = majority.predict(np.empty((len(frame), 0)))
    report = evaluate_scores(frame, scores)
    for level in report.levels:
        assert report.hit_rates[level] <= level + 0.02

    # The ties rank by cell id, so 20% coverage holds exactly the ids below 100
    frame = uniform_events_frame(range(100, 500), seed=2)
    report = evaluate_scores(frame, majority.predict(np.empty((len(frame), 0))))
    assert report.hit_rates == {0.05: 0.0, 0.1: 0.0, 0.2: 0.0}
    assert report.pai == {0.05: 0.0, 0.1: 0.0, 0.2: 0.0}


def test_compare_needs_daily_hit_rates(tmp_path: str) -> None:
    """Test that a directory without a run cannot be compared."""
    with raises(DataError):
        compare(str(tmp_path), str(tmp_path))


def test_saved_predictor(hyper_run: ExperimentResult, tmp_path: str) -> None:
    """Test that predictors read back from disk score rows identically."""
    trained = hyper_run.runs[""]
    X, _ = trained.split.test.xy()
    path = os.path.join(tmp_path, "model.npz")
    save_predictor(trained.predictor, path)
    restored = load_predictor(path)
    assert restored.strategy == "hyper"
    assert restored.feature_names == trained.predictor.feature_names
    assert np.array_equal(restored.predict(X), trained.predictor.predict(X))

    majority = Predictor("majority", ("a", "b"))
    save_predictor(majority, path)
    restored = load_predictor(path)
    assert restored.model is None
    assert restored.predict(np.ones((3, 2))).tolist() == [0.0, 0.0, 0.0]
    with raises(ArityError):
        restored.predict(np.ones((3, 3)))


def test_load_predictor_rejects_other_files(tmp_path: str) -> None:
    """Test that a missing or foreign npz file is a data error."""
    path = os.path.join(tmp_path, "other.npz")
    with raises(DataError):
        load_predictor(path)
    np.savez(path, values=np.arange(3))
    with raises(DataError):
        load_predictor(path)


def test_tune_selects_from_grid(manifest: str, hyper_run: ExperimentResult) -> None:
    """Test that cross validation picks one of the grid's hyperparameters."""
    config = experiment(manifest, os.path.dirname(hyper_run.run_dir))
    train = hyper_run.runs[""].split.train
    ctx = logger.RunContext(experiment="test")
    assert tune(config, train, ctx) == config.base_spec

    grid = replace(config, grid={"strength": [0.01, 1.0]})
    spec = tune(grid, train, ctx)
    assert spec.hyperparams["strength"] in (0.01, 1.0)


def test_stratum_cells() -> None:
    """Test that the thresholds belong to the lower stratum."""
    attributes = pd.DataFrame(
        {"popdens": [1.0, 2.25, 5.0, 16.75, 20.0]},
        index=pd.Index(range(5), name="cell_id"),
    )
    strata = stratum_cells(attributes, StrataConfig(), range(5))
    assert {name: cells.tolist() for name, cells in strata.items()} == {
        "low": [0, 1],
        "medium": [2, 3],
        "high": [4],
    }
    with raises(ConfigError):
        stratum_cells(attributes, StrataConfig(column="income"), range(5))
    with raises(ConfigError):
        stratum_cells(None, StrataConfig(), range(5))


def test_hotspots_geojson() -> None:
    """Test that the hotspots of several days become one point collection."""
    table = pd.DataFrame(
        {
            "rank": [1, 2],
            "cell_id": [4, 9],
            "score": [0.9, 0.5],
            "x": [10.0, 30.0],
            "y": [5.0, 5.0],
        }
    )
    collection = json.loads(
        hotspots_geojson({"2016-01-01": table, "2016-01-02": table})
    )
    assert collection["type"] == "FeatureCollection"
    assert len(collection["features"]) == 4
    first = collection["features"][0]
    assert first["geometry"]["coordinates"] == [10.0, 5.0]
    assert first["properties"]["date"] == "2016-01-01"


def test_matrix_runs_every_combination(manifest: str, tmp_path: str) -> None:
    """Test that a 2x2 matrix writes the runs of its single experiments."""
    mapping = toml.load(manifest)
    mapping["Matrix"] = {
        "strategy": ["hyper", "under"],
        "feature_set": ["crime", "all"],
        "n_jobs": 2,
    }
    flags = {"learner": "logistic_l2", "plot": False, "phi": 3}
    output = os.path.join(tmp_path, "matrix")
    matrix = MatrixConfig.from_mapping(
        mapping, os.path.dirname(manifest), {**flags, "output": output}
    )
    names = ["hyper-crime", "hyper-all", "under-crime", "under-all"]
    assert [config.name for config in matrix.experiments] == names
    assert [config.phi for config in matrix.experiments] == [3, 3, None, None]
    assert matrix.baseline == "hyper-crime"
    result = run_matrix(matrix)

    for config in matrix.experiments:
        single = ExperimentConfig.from_file(
            manifest,
            overrides={
                **flags,
                "phi": config.phi,
                "strategy": config.strategy,
                "feature_set": config.feature_set,
                "name": config.name,
                "output": os.path.join(tmp_path, "single"),
            },
        )
        run = run_experiment(single)
        contents = []
        for directory in (os.path.join(output, config.name), run.run_dir):
            with open(os.path.join(directory, "metrics.csv"), "rb") as file:
                contents.append(file.read())
        assert contents[0] == contents[1]

    summary = pd.read_csv(os.path.join(output, "matrix.csv"))
    assert summary["experiment"].unique().tolist() == names
    assert len(summary) == 12
    comparison = pd.read_csv(os.path.join(output, "comparison.csv"))
    assert comparison["experiment"].unique().tolist() == names[1:]
    assert (comparison["baseline"] == "hyper-crime").all()
    assert len(result.comparison) == 9


@mark.parametrize(
    "matrix",
    [
        {},
        {"strategy": []},
        {"colour": ["red"]},
        {"strategy": ["hyper", "hyper"]},
        {"strata": ["yes"]},
        {"strategy": ["hyper", "under"], "baseline": "naive"},
    ],
)
def test_invalid_matrix(manifest: str, matrix: Dict[str, Any]) -> None:
    """Test that invalid matrix axes are configuration errors."""
    mapping = {**toml.load(manifest), "Matrix": matrix}
    with raises(ConfigError):
        MatrixConfig.from_mapping(mapping, os.path.dirname(manifest))


def test_matrix_axis_conflicts_with_flag(manifest: str) -> None:
    """Test that a flag cannot fix an axis the matrix varies."""
    mapping = {**toml.load(manifest), "Matrix": {"strategy": ["hyper", "under"]}}
    with raises(ConfigError):
        MatrixConfig.from_mapping(
            mapping, os.path.dirname(manifest), {"strategy": "naive"}
        )


@slow
def test_hyper_ensemble_beats_baselines(tmp_path: str) -> None:
    """Test on full-size synthetic cities that the hyper-ensemble wins most seeds."""
    forest = {"n_trees": 50, "max_depth": 8}
    beats_naive = beats_under = 0
    for seed in range(10):
        directory = os.path.join(tmp_path, f"city_{seed}")
        write_dataset(generate(SynthConfig(seed=seed)), directory)
        manifest = os.path.join(directory, "experiment.toml")
        reports = {}
        for strategy in ("hyper", "under", "naive"):
            overrides = {"strategy": strategy, "plot": False, "n_jobs": -1}
            config = ExperimentConfig.from_file(manifest, overrides=overrides)
            config = replace(config, hyperparams=forest)
            reports[strategy] = run_experiment(config).reports[""]
        hyper = reports["hyper"]
        beats_naive += hyper.hit_rates[0.05] > reports["naive"].hit_rates[0.05]
        beats_under += hyper.auc > reports["under"].auc
    assert beats_naive >= 8
    assert beats_under >= 7
