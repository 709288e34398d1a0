"""The experiment pipeline from the input files to the metrics on disk.

ingest -> features -> split -> tune -> train -> evaluate -> write
"""
import os
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from datetime import datetime
from functools import partial
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import geopandas
import numpy as np
import pandas as pd
import toml
from joblib import Parallel, delayed

from hyperspot import logger
from hyperspot.config import (
    COST,
    HYPER,
    MAJORITY,
    NAIVE,
    NEAR_MISS,
    OVER,
    SMOTE,
    STRATA_NAMES,
    UNDER,
    ExperimentConfig,
    MatrixConfig,
    StrataConfig,
)
from hyperspot.dataset import (
    ChronoSplit,
    ReadAudit,
    SpatioTemporalFrame,
    build_frame,
    build_grid,
    chronological_split,
    class_balance,
    load_cell_attributes,
    load_eligibility,
    load_events,
    restrict_cells,
)
from hyperspot.ensemble import (
    ENSEMBLE_HEADER,
    HyperEnsemble,
    derive_seed,
    ensemble_from_arrays,
    ensemble_to_arrays,
    fit_under_sampled,
    train_hyper_ensemble,
)
from hyperspot.evaluation import (
    DailyRanking,
    MetricReport,
    budget,
    evaluate_scores,
    paired_t_test,
    plot_surveillance,
)
from hyperspot.features import assemble, load_public_events, load_weather
from hyperspot.helpers import (
    ArityError,
    ConfigError,
    DataError,
    StageError,
    get_duration_str,
)
from hyperspot.learners import LearnerModel, LearnerSpec, cost_weights, fit, spec_grid
from hyperspot.learners.search import Prepared, cross_validate
from hyperspot.learners.serialization import (
    FORMAT_VERSION,
    model_from_arrays,
    model_to_arrays,
    read_archive,
    text_array,
)
from hyperspot.resampling import (
    ResampleMethod,
    ResampleSpec,
    random_under_sample,
    random_under_sample_indices,
    resample,
)

FLOAT_FORMAT = "%.17g"

PREDICTOR_HEADER = "predictor"
MODEL_PREFIX = "model/"

RESAMPLERS = {
    OVER: ResampleMethod.RANDOM_OVER,
    SMOTE: ResampleMethod.SMOTE,
    NEAR_MISS: ResampleMethod.NEAR_MISS,
}

Model = Union[None, LearnerModel, HyperEnsemble]


@dataclass(frozen=True, eq=False)
class Inputs:
    """The tables read from the files of an experiment."""

    events: pd.DataFrame
    eligibility: Optional[pd.DataFrame] = None
    attributes: Optional[pd.DataFrame] = None
    weather: Optional[pd.DataFrame] = None
    public_events: Optional[pd.DataFrame] = None


@dataclass(frozen=True, eq=False)
class Predictor:
    """The scorer produced by a strategy; the majority strategy scores everything 0."""

    strategy: str
    feature_names: Tuple[str, ...]
    model: Model = None

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Score every row with the probability of an event."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != len(self.feature_names):
            raise ArityError(len(self.feature_names), X.shape[1] if X.ndim == 2 else 1)
        if self.model is None:
            return np.zeros(len(X))
        if isinstance(self.model, HyperEnsemble):
            return self.model.predict(X)
        return self.model.predict_proba(X)

    @property
    def spec(self) -> Optional[LearnerSpec]:
        """The learner spec of the model."""
        if self.model is None:
            return None
        if isinstance(self.model, HyperEnsemble):
            return self.model.base_spec
        return self.model.spec


@dataclass(frozen=True, eq=False)
class TrainedRun:
    """A split frame and the predictor trained on its training part."""

    split: ChronoSplit
    predictor: Predictor
    audit: ReadAudit


@dataclass(eq=False)
class ExperimentResult:
    """The reports of an experiment, one per stratum."""

    run_dir: str
    reports: Dict[str, MetricReport] = field(default_factory=dict)
    runs: Dict[str, TrainedRun] = field(default_factory=dict)


@contextmanager
def stage(
    name: str, ctx: logger.RunContext, audit: Optional[ReadAudit] = None
) -> Iterator[logger.RunContext]:
    """Run a block as a named stage; failures are re-raised tagged with the stage."""
    start = datetime.now()
    stage_ctx = ctx.at(name)
    if audit is not None:
        audit.stage = name
    logger.debug(f"Starting {name}.", stage_ctx)
    try:
        yield stage_ctx
    except StageError:
        raise
    except Exception as error:
        raise StageError(name, error) from error
    logger.info(f"Finished {name} in {get_duration_str(start)}.", stage_ctx)


def run_directory(config: ExperimentConfig) -> str:
    """Get the directory the outputs of an experiment are written to."""
    return os.path.join(config.output, config.name or config.strategy)


def load_inputs(config: ExperimentConfig) -> Inputs:
    """Read every configured input file."""
    return Inputs(
        events=load_events(config.events),
        eligibility=(
            load_eligibility(config.eligibility) if config.eligibility else None
        ),
        attributes=load_cell_attributes(config.cells) if config.cells else None,
        weather=load_weather(config.weather) if config.weather else None,
        public_events=(
            load_public_events(config.public_events) if config.public_events else None
        ),
    )


def ingest(
    config: ExperimentConfig, inputs: Inputs, ctx: logger.RunContext
) -> SpatioTemporalFrame:
    """Build the grid and the labelled frame of the study period."""
    events = inputs.events
    if config.start is None and len(events) == 0:
        raise DataError("cannot infer the study period without events")
    first_day = config.start or pd.Timestamp(events["date"].min()).date()
    last_day = config.end or pd.Timestamp(events["date"].max()).date()

    grid = build_grid(events, config.cell_size, inputs.eligibility, config.bounds)
    frame = build_frame(
        grid, events, (first_day, last_day), config.resolution, config.on_invalid
    )
    balance = class_balance(frame)
    logger.info(
        f"{grid.n_eligible:,d} eligible cells over {frame.n_buckets} "
        f"{config.resolution} "
        f"buckets: {balance.positives:,d} positive rows ({balance.ratio:.3%}).",
        ctx,
    )
    return frame


def add_features(
    config: ExperimentConfig, frame: SpatioTemporalFrame, inputs: Inputs
) -> SpatioTemporalFrame:
    """Attach the configured feature set to the frame."""
    return assemble(
        frame,
        inputs.attributes,
        inputs.weather,
        feature_set=config.feature_set,
        windows=config.windows,
        public_events=inputs.public_events,
        diversity=config.diversity,
        overrides=config.groups,
    )


def prepare_frame(
    config: ExperimentConfig, ctx: logger.RunContext
) -> Tuple[SpatioTemporalFrame, Inputs]:
    """Run the ingest and feature stages."""
    with stage("ingest", ctx) as stage_ctx:
        inputs = load_inputs(config)
        frame = ingest(config, inputs, stage_ctx)
    with stage("features", ctx):
        frame = add_features(config, frame, inputs)
    return frame, inputs


def stratum_cells(
    attributes: Optional[pd.DataFrame],
    strata: StrataConfig,
    cells: Sequence[int],
) -> Dict[str, np.ndarray]:
    """Split the cells into the low, medium and high strata of a static column.

    A cell belongs to the low stratum up to the first threshold and to the high
    stratum above the second one.
    """
    if attributes is None or strata.column not in attributes.columns:
        raise ConfigError(f"stratification needs the cell attribute '{strata.column}'")
    cells = np.asarray(cells)
    values = attributes[strata.column].reindex(cells).to_numpy(dtype=float)
    low, high = strata.thresholds
    masks = (values <= low, (values > low) & (values <= high), values > high)
    return {name: cells[mask] for name, mask in zip(STRATA_NAMES, masks)}


def strata_frames(
    config: ExperimentConfig, frame: SpatioTemporalFrame, inputs: Inputs
) -> Dict[str, SpatioTemporalFrame]:
    """Get the frame of every stratum; the key "" stands for the whole area."""
    if config.strata is None:
        return {"": frame}
    frames = {}
    cells_by_stratum = stratum_cells(inputs.attributes, config.strata, frame.cells)
    for name, cells in cells_by_stratum.items():
        if cells.size == 0:
            logger.warning(f"The {name} stratum has no cells, skipping it.")
            continue
        frames[name] = restrict_cells(frame, cells)
    return frames


def prepare_training(
    config: ExperimentConfig, X: np.ndarray, y: np.ndarray, seed: int
) -> Prepared:
    """Apply the strategy's imbalance treatment to training rows."""
    if config.strategy == COST:
        return X, y, cost_weights(y)
    if config.strategy in (UNDER, HYPER):
        X_sampled, y_sampled = random_under_sample(X, y, seed)
        return X_sampled, y_sampled, None
    if config.strategy in RESAMPLERS:
        spec = ResampleSpec(RESAMPLERS[config.strategy], config.k_neighbors, seed)
        X_sampled, y_sampled = resample(spec, X, y)
        return X_sampled, y_sampled, None
    return X, y, None


def tune(
    config: ExperimentConfig, train: SpatioTemporalFrame, ctx: logger.RunContext
) -> LearnerSpec:
    """Select the hyperparameters by cross validation on the training frame.

    The under-sampling strategies are tuned on a single under-sampled draw.
    """
    if config.strategy == MAJORITY or not (config.tune or config.grid):
        return config.base_spec
    # Fixed hyperparameters apply to every grid point
    grid = [
        LearnerSpec(spec.kind, {**config.hyperparams, **spec.hyperparams}, spec.seed)
        for spec in spec_grid(config.learner, config.grid, seed=config.seed)
    ]

    first_seed = derive_seed(config.seed, 0)
    prepare = None
    if config.strategy in (UNDER, HYPER):
        _, labels = train.xy()
        rows = random_under_sample_indices(labels, first_seed)
        train = train.with_table(train.table.iloc[rows])
    elif config.strategy != NAIVE:
        prepare = partial(prepare_training, config, seed=first_seed)

    logger.info(f"Cross validating {len(grid)} hyperparameter sets.", ctx)
    return cross_validate(
        grid, train, config.folds, config.seed, prepare=prepare, n_jobs=config.n_jobs
    )


def train_predictor(
    config: ExperimentConfig, train: SpatioTemporalFrame, spec: LearnerSpec
) -> Predictor:
    """Train the predictor of the configured strategy."""
    names = tuple(train.feature_names)
    if config.strategy == MAJORITY:
        return Predictor(config.strategy, names)
    if config.strategy == HYPER:
        ensemble = train_hyper_ensemble(
            train, config.phi, spec, config.seed, config.n_jobs
        )
        return Predictor(config.strategy, names, ensemble)

    X, y = train.xy()
    first_seed = derive_seed(config.seed, 0)
    if config.strategy == UNDER:
        model = fit_under_sampled(spec, X, y, first_seed, names, n_jobs=config.n_jobs)
        return Predictor(config.strategy, names, model)
    X, y, weights = prepare_training(config, X, y, first_seed)
    model = fit(spec, X, y, weights, feature_names=names, n_jobs=config.n_jobs)
    return Predictor(config.strategy, names, model)


def train_run(
    config: ExperimentConfig, frame: SpatioTemporalFrame, ctx: logger.RunContext
) -> TrainedRun:
    """Split the frame, tune the learner and train the predictor."""
    audit = ReadAudit()
    with stage("split", ctx, audit) as stage_ctx:
        split = chronological_split(frame, config.train_fraction, audit=audit)
        logger.info(
            f"Training on buckets before {split.boundary_day} "
            f"({split.train.bucket_date(split.boundary_day).isoformat()}).",
            stage_ctx,
        )
    with stage("tune", ctx, audit) as stage_ctx:
        spec = tune(config, split.train, stage_ctx)
    with stage("train", ctx, audit):
        predictor = train_predictor(config, split.train, spec)
    return TrainedRun(split=split, predictor=predictor, audit=audit)


def evaluate_run(
    config: ExperimentConfig,
    split: ChronoSplit,
    predictor: Predictor,
    ctx: logger.RunContext,
    audit: Optional[ReadAudit] = None,
) -> MetricReport:
    """Score and rank every test bucket and compute the metrics."""
    audit = audit or ReadAudit()
    audit.assert_no_leak(split.boundary_day)
    test = replace(split.test, audit=audit)
    with stage("evaluate", ctx, audit) as stage_ctx:
        if tuple(test.feature_names) != predictor.feature_names:
            raise ConfigError("the model was trained on other features than configured")
        X, _ = test.xy()
        report = evaluate_scores(
            test,
            predictor.predict(X),
            levels=config.levels,
            curve_grid=config.curve_grid,
            pooling=config.pooling,
        )
        summary = ", ".join(
            f"{level:.0%}: {report.hit_rates[level]:.3f}" for level in report.levels
        )
        logger.info(f"Hit rates {summary}; AUC {report.auc:.4f}.", stage_ctx)
    return report


def predictor_to_arrays(predictor: Predictor) -> Dict[str, np.ndarray]:
    """Get the arrays of a predictor with a header naming its strategy."""
    header = {
        "format_version": FORMAT_VERSION,
        "strategy": predictor.strategy,
        "feature_names": list(predictor.feature_names),
    }
    arrays = {PREDICTOR_HEADER: text_array(toml.dumps(header))}
    if isinstance(predictor.model, HyperEnsemble):
        arrays.update(ensemble_to_arrays(predictor.model))
    elif predictor.model is not None:
        arrays.update(model_to_arrays(predictor.model, prefix=MODEL_PREFIX))
    return arrays


def save_predictor(predictor: Predictor, path: str) -> None:
    """Write a predictor to an npz file."""
    np.savez(path, **predictor_to_arrays(predictor))


def load_predictor(path: str) -> Predictor:
    """Read a predictor written by save_predictor."""
    if not os.path.exists(path):
        raise DataError(f"no trained model at {path}, run train first")
    arrays = read_archive(path)
    if PREDICTOR_HEADER not in arrays:
        raise DataError(f"{path} is not a model file")
    header = toml.loads(str(arrays[PREDICTOR_HEADER]))
    if header.get("format_version") != FORMAT_VERSION:
        version = header.get("format_version")
        raise DataError(f"unsupported model format version {version}")

    model: Model = None
    if ENSEMBLE_HEADER in arrays:
        model = ensemble_from_arrays(arrays)
    elif f"{MODEL_PREFIX}header" in arrays:
        model = model_from_arrays(arrays, prefix=MODEL_PREFIX)
    return Predictor(header["strategy"], tuple(header["feature_names"]), model)


def write_csv(table: pd.DataFrame, path: str) -> None:
    """Write a table with a header row and round-trip float precision."""
    table.to_csv(path, index=False, float_format=FLOAT_FORMAT, encoding="utf-8")


def write_model(
    config: ExperimentConfig, run_dir: str, trained: TrainedRun
) -> None:
    """Write the predictor and the resolved configuration of a run."""
    os.makedirs(run_dir, exist_ok=True)
    save_predictor(trained.predictor, os.path.join(run_dir, "model.npz"))

    split = trained.split
    manifest = config.to_mapping()
    run: Dict[str, object] = {
        "strategy": config.strategy,
        "boundary_day": split.boundary_day,
        "boundary_date": split.train.bucket_date(split.boundary_day).isoformat(),
        "train_rows": len(split.train),
        "test_rows": len(split.test),
        "test_period": [
            split.test.bucket_date(split.test.days.min()).isoformat(),
            split.test.period[1].isoformat(),
        ],
    }
    spec = trained.predictor.spec
    if spec is not None:
        run["learner"] = spec.describe()
    manifest["Run"] = run
    with open(os.path.join(run_dir, "run.toml"), "w", encoding="utf-8") as file:
        toml.dump(manifest, file)


def hotspot_table(
    frame: SpatioTemporalFrame, ranking: DailyRanking, k: int
) -> pd.DataFrame:
    """Get the top k cells of a ranking with their centroids."""
    cells = ranking.top(k)
    xs, ys = frame.grid.centroids(cells)
    return pd.DataFrame(
        {
            "rank": np.arange(1, cells.size + 1),
            "cell_id": cells,
            "score": ranking.scores[:k],
            "x": xs,
            "y": ys,
        }
    )


def hotspots_geojson(tables: Dict[str, pd.DataFrame]) -> str:
    """Get the hotspots of several days as a GeoJSON point collection."""
    frames = [table.assign(date=day) for day, table in tables.items()]
    combined = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(
        columns=["rank", "cell_id", "score", "x", "y", "date"]
    )
    points = geopandas.GeoDataFrame(
        combined, geometry=geopandas.points_from_xy(combined["x"], combined["y"])
    )
    return points.to_json()


def write_reports(
    config: ExperimentConfig,
    run_dir: str,
    test: SpatioTemporalFrame,
    report: MetricReport,
    predictor: Predictor,
) -> None:
    """Write the metrics, the curve, the daily hit rates and the daily hotspots."""
    os.makedirs(os.path.join(run_dir, "hotspots"), exist_ok=True)
    base_learner = "none" if predictor.spec is None else predictor.spec.kind.value
    write_csv(
        report.metric_rows(config.strategy, base_learner, config.feature_set),
        os.path.join(run_dir, "metrics.csv"),
    )
    write_csv(report.curve.to_frame(), os.path.join(run_dir, "surveillance.csv"))
    write_csv(report.daily_rows(test), os.path.join(run_dir, "daily_hit_rates.csv"))

    k = max(1, budget(max(report.levels), test.cells.size))
    tables = {}
    for ranking in report.rankings:
        day = test.bucket_date(ranking.day).isoformat()
        tables[day] = hotspot_table(test, ranking, k)
        write_csv(tables[day], os.path.join(run_dir, "hotspots", f"{day}.csv"))

    if config.plot:
        plot_surveillance(
            {config.name or config.strategy: report.curve},
            os.path.join(run_dir, "surveillance.svg"),
        )
    if config.geojson:
        path = os.path.join(run_dir, "hotspots.geojson")
        with open(path, "w", encoding="utf-8") as file:
            file.write(hotspots_geojson(tables))


def _stratum_dir(run_dir: str, stratum: str) -> str:
    return os.path.join(run_dir, stratum) if stratum else run_dir


def _stratum_ctx(ctx: logger.RunContext, stratum: str) -> logger.RunContext:
    if not stratum:
        return ctx
    return replace(ctx, experiment=f"{ctx.experiment}/{stratum}")


def train_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run every stage up to training and write the models."""
    ctx = logger.RunContext(experiment=config.name or config.strategy)
    result = ExperimentResult(run_dir=run_directory(config))
    frame, inputs = prepare_frame(config, ctx)
    for stratum, sub_frame in strata_frames(config, frame, inputs).items():
        stratum_ctx = _stratum_ctx(ctx, stratum)
        trained = train_run(config, sub_frame, stratum_ctx)
        with stage("write", stratum_ctx):
            write_model(config, _stratum_dir(result.run_dir, stratum), trained)
        result.runs[stratum] = trained
    return result


def evaluate_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Evaluate the models written by train_experiment on the test period."""
    ctx = logger.RunContext(experiment=config.name or config.strategy)
    result = ExperimentResult(run_dir=run_directory(config))
    frame, inputs = prepare_frame(config, ctx)
    for stratum, sub_frame in strata_frames(config, frame, inputs).items():
        stratum_ctx = _stratum_ctx(ctx, stratum)
        directory = _stratum_dir(result.run_dir, stratum)
        with stage("split", stratum_ctx):
            split = chronological_split(sub_frame, config.train_fraction)
            predictor = load_predictor(os.path.join(directory, "model.npz"))
        report = evaluate_run(config, split, predictor, stratum_ctx)
        with stage("write", stratum_ctx):
            write_reports(config, directory, split.test, report, predictor)
        result.reports[stratum] = report
    return result


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run all stages of an experiment and write every output."""
    ctx = logger.RunContext(experiment=config.name or config.strategy)
    result = ExperimentResult(run_dir=run_directory(config))
    frame, inputs = prepare_frame(config, ctx)
    for stratum, sub_frame in strata_frames(config, frame, inputs).items():
        stratum_ctx = _stratum_ctx(ctx, stratum)
        directory = _stratum_dir(result.run_dir, stratum)
        trained = train_run(config, sub_frame, stratum_ctx)
        with stage("write", stratum_ctx):
            write_model(config, directory, trained)
        report = evaluate_run(
            config, trained.split, trained.predictor, stratum_ctx, trained.audit
        )
        with stage("write", stratum_ctx):
            write_reports(
                config, directory, trained.split.test, report, trained.predictor
            )
        result.runs[stratum] = trained
        result.reports[stratum] = report
    return result


def read_daily_hit_rates(run_dir: str) -> pd.DataFrame:
    """Read the daily hit rates of a run, indexed by day and coverage."""
    path = os.path.join(run_dir, "daily_hit_rates.csv")
    try:
        table = pd.read_csv(path)
    except (OSError, pd.errors.ParserError) as error:
        raise DataError(f"cannot read {path}: {error}")
    return table.set_index(["day", "coverage"]).sort_index()


def compare(run_a: str, run_b: str) -> pd.DataFrame:
    """Test per coverage level whether run A has higher daily hit rates than run B."""
    rates_a = read_daily_hit_rates(run_a)
    rates_b = read_daily_hit_rates(run_b)
    if not rates_a.index.equals(rates_b.index):
        raise DataError("the runs do not share the test days and coverage levels")

    rows: List[Dict[str, float]] = []
    for coverage in rates_a.index.get_level_values("coverage").unique():
        a = rates_a.xs(coverage, level="coverage")["hit_rate"].to_numpy(dtype=float)
        b = rates_b.xs(coverage, level="coverage")["hit_rate"].to_numpy(dtype=float)
        result = paired_t_test(a, b)
        rows.append(
            {
                "coverage": coverage,
                "mean_difference": result.mean_difference,
                "t": result.t,
                "df": result.df,
                "p": result.p,
            }
        )
    return pd.DataFrame(rows, columns=["coverage", "mean_difference", "t", "df", "p"])


@dataclass(eq=False)
class MatrixResult:
    """The reports of every experiment of a matrix and their comparison."""

    output: str
    reports: Dict[str, Dict[str, MetricReport]]
    summary: pd.DataFrame
    comparison: pd.DataFrame


def _experiment_reports(config: ExperimentConfig) -> Dict[str, MetricReport]:
    return run_experiment(config).reports


def matrix_summary(
    matrix: MatrixConfig, reports: Dict[str, Dict[str, MetricReport]]
) -> pd.DataFrame:
    """Get the metric rows of every experiment and stratum in one table."""
    tables = []
    for config in matrix.experiments:
        base_learner = "none" if config.strategy == MAJORITY else config.learner.value
        for stratum, report in reports[config.name].items():
            table = report.metric_rows(
                config.strategy, base_learner, config.feature_set
            )
            table.insert(0, "experiment", config.name)
            table.insert(1, "stratum", stratum or "all")
            table.insert(2, "resolution", config.resolution)
            tables.append(table)
    return pd.concat(tables, ignore_index=True)


def matrix_comparison(
    matrix: MatrixConfig, reports: Dict[str, Dict[str, MetricReport]]
) -> pd.DataFrame:
    """Compare every experiment with the baseline on their shared strata.

    Experiments with another resolution than the baseline have other test buckets
    and are left out.
    """
    columns = ["experiment", "baseline", "stratum", "coverage"]
    columns += ["mean_difference", "t", "df", "p"]
    baseline = next(
        config for config in matrix.experiments if config.name == matrix.baseline
    )
    tables = []
    for config in matrix.experiments:
        if config.name == baseline.name or config.resolution != baseline.resolution:
            continue
        for stratum in reports[config.name]:
            if stratum not in reports[baseline.name]:
                continue
            table = compare(
                _stratum_dir(run_directory(config), stratum),
                _stratum_dir(run_directory(baseline), stratum),
            )
            table.insert(0, "experiment", config.name)
            table.insert(1, "baseline", baseline.name)
            table.insert(2, "stratum", stratum or "all")
            tables.append(table)
    if not tables:
        return pd.DataFrame(columns=columns)
    return pd.concat(tables, ignore_index=True)[columns]


def run_matrix(matrix: MatrixConfig) -> MatrixResult:
    """Run the experiments of a matrix in a worker pool and compare them."""
    ctx = logger.RunContext(experiment="matrix")
    start = datetime.now()
    logger.info(
        f"Running {len(matrix.experiments)} experiments on {matrix.n_jobs} workers.",
        ctx,
    )
    results = Parallel(n_jobs=matrix.n_jobs)(
        delayed(_experiment_reports)(config) for config in matrix.experiments
    )
    reports = {
        config.name: result for config, result in zip(matrix.experiments, results)
    }
    with stage("compare", ctx):
        summary = matrix_summary(matrix, reports)
        comparison = matrix_comparison(matrix, reports)
        os.makedirs(matrix.output, exist_ok=True)
        write_csv(summary, os.path.join(matrix.output, "matrix.csv"))
        write_csv(comparison, os.path.join(matrix.output, "comparison.csv"))
    logger.info(f"Finished the matrix in {get_duration_str(start)}.", ctx)
    return MatrixResult(matrix.output, reports, summary, comparison)
