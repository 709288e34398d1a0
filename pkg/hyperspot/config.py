"""Experiment manifests: TOML sections resolved into a validated ExperimentConfig."""
import copy
import itertools
import os
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date
from fractions import Fraction
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import toml

from hyperspot import logger
from hyperspot.dataset import DAILY, ERROR, REJECT, RESOLUTIONS, parse_fraction
from hyperspot.evaluation import DEFAULT_LEVELS, MEAN, POOLINGS
from hyperspot.features import DEFAULT_WINDOWS, FEATURE_SETS, GROUPS
from hyperspot.helpers import ConfigError, try_parse_day
from hyperspot.learners import LearnerKind, LearnerSpec, parse_kind

MAJORITY = "majority"
NAIVE = "naive"
COST = "cost"
UNDER = "under"
OVER = "over"
SMOTE = "smote"
NEAR_MISS = "nearmiss"
HYPER = "hyper"
STRATEGIES = (MAJORITY, NAIVE, COST, UNDER, OVER, SMOTE, NEAR_MISS, HYPER)

DEFAULT_PHI = 10

# The population density split of the stratified runs
DEFAULT_STRATA_COLUMN = "popdens"
DEFAULT_STRATA_THRESHOLDS = (2.25, 16.75)
STRATA_NAMES = ("low", "medium", "high")

# Command-line flags and the (section, key) they override
FLAG_KEYS: Dict[str, Tuple[str, str]] = {
    "strategy": ("Model", "strategy"),
    "phi": ("Model", "phi"),
    "learner": ("Model", "learner"),
    "seed": ("Model", "seed"),
    "n_jobs": ("Model", "n_jobs"),
    "tune": ("Model", "tune"),
    "train_fraction": ("Model", "train_fraction"),
    "feature_set": ("Features", "set"),
    "resolution": ("Grid", "resolution"),
    "coverage": ("Evaluation", "coverage"),
    "pooling": ("Evaluation", "pooling"),
    "strata": ("Strata", "enabled"),
    "output": ("Output", "directory"),
    "geojson": ("Output", "geojson"),
    "plot": ("Output", "plot"),
    "name": ("Output", "name"),
}

# The axes an experiment matrix can vary, named like their flags
MATRIX_AXES = ("strategy", "learner", "feature_set", "strata", "resolution")


@dataclass(frozen=True)
class StrataConfig:
    """Splits the cells into three strata by two thresholds on a static column."""

    column: str = DEFAULT_STRATA_COLUMN
    thresholds: Tuple[float, float] = DEFAULT_STRATA_THRESHOLDS

    def __post_init__(self) -> None:
        """Validate the thresholds."""
        if len(self.thresholds) != 2 or not self.thresholds[0] < self.thresholds[1]:
            raise ConfigError(
                f"strata need two increasing thresholds, got {list(self.thresholds)}"
            )


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully resolved experiment; paths are absolute."""

    events: str
    cells: Optional[str] = None
    eligibility: Optional[str] = None
    weather: Optional[str] = None
    public_events: Optional[str] = None
    start: Optional[date] = None
    end: Optional[date] = None
    on_invalid: str = REJECT
    cell_size: float = 200.0
    origin: Optional[Tuple[float, float]] = None
    width: Optional[int] = None
    height: Optional[int] = None
    resolution: str = DAILY
    feature_set: str = "all"
    windows: Tuple[int, ...] = DEFAULT_WINDOWS
    groups: Dict[str, str] = field(default_factory=dict)
    diversity: Dict[str, List[str]] = field(default_factory=dict)
    strategy: str = HYPER
    phi: Optional[int] = None
    learner: LearnerKind = LearnerKind.RANDOM_FOREST
    hyperparams: Dict[str, Any] = field(default_factory=dict)
    grid: Optional[Dict[str, List[Any]]] = None
    tune: bool = False
    folds: int = 5
    k_neighbors: int = 3
    train_fraction: Fraction = Fraction(2, 3)
    seed: int = 0
    n_jobs: int = 1
    levels: Tuple[float, ...] = DEFAULT_LEVELS
    curve_step: float = 0.01
    pooling: str = MEAN
    strata: Optional[StrataConfig] = None
    output: str = "runs"
    geojson: bool = False
    plot: bool = True
    name: str = ""

    @property
    def base_spec(self) -> LearnerSpec:
        """The learner spec before tuning."""
        return LearnerSpec(
            kind=self.learner, hyperparams=self.hyperparams, seed=self.seed
        )

    @property
    def curve_grid(self) -> Tuple[float, ...]:
        """The coverage levels of the surveillance curve."""
        steps = int(round(1 / self.curve_step))
        return tuple(round(step / steps, 10) for step in range(1, steps + 1))

    @property
    def bounds(self) -> Optional[Tuple[Tuple[float, float], int, int]]:
        """The explicit grid bounds, if configured."""
        if self.origin is None:
            return None
        return self.origin, self.width, self.height

    @classmethod
    def from_file(
        cls, path: str, overrides: Optional[Mapping[str, Any]] = None
    ) -> "ExperimentConfig":
        """Read an experiment manifest; relative paths resolve against its directory."""
        try:
            mapping = defaultdict(dict, toml.load(path))
        except (OSError, toml.TomlDecodeError) as error:
            raise ConfigError(f"cannot read the configuration {path}: {error}")
        base_dir = os.path.dirname(os.path.abspath(path))
        return cls.from_mapping(mapping, base_dir=base_dir, overrides=overrides)

    @classmethod
    def from_mapping(
        cls,
        mapping: Mapping[str, Any],
        base_dir: str = ".",
        overrides: Optional[Mapping[str, Any]] = None,
    ) -> "ExperimentConfig":
        """Validate the TOML sections; flag overrides win over the sections."""
        sections = apply_overrides(mapping, overrides or {})
        data = sections["Data"]
        grid = sections["Grid"]
        features = sections["Features"]
        model = sections["Model"]
        evaluation = sections["Evaluation"]
        strata = sections["Strata"]
        output = sections["Output"]

        def path(key: str, required: bool = False) -> Optional[str]:
            value = data.get(key)
            if value is None:
                if required:
                    raise ConfigError(f"[Data] needs the path '{key}'")
                return None
            resolved = os.path.normpath(os.path.join(base_dir, value))
            if not os.path.exists(resolved):
                raise ConfigError(f"the {key} file {resolved} does not exist")
            return resolved

        strategy = str(model.get("strategy", HYPER)).lower()
        if strategy not in STRATEGIES:
            known = ", ".join(STRATEGIES)
            raise ConfigError(f"unknown strategy '{strategy}', expected one of {known}")
        phi = model.get("phi")
        if phi is not None and strategy != HYPER:
            flags = overrides or {}
            if flags.get("strategy") is None or flags.get("phi") is not None:
                raise ConfigError(
                    f"phi is only valid for the hyper strategy, not '{strategy}'"
                )
            # The manifest's phi belongs to the strategy replaced by the flag
            logger.warning(f"Ignoring phi = {phi} for the '{strategy}' strategy.")
            phi = None
        if strategy == HYPER:
            phi = int(DEFAULT_PHI if phi is None else phi)
            if phi < 1:
                raise ConfigError(f"phi must be at least 1, got {phi}")

        feature_set = str(features.get("set", "all")).lower()
        if feature_set not in FEATURE_SETS:
            raise ConfigError(f"unknown feature set '{feature_set}'")
        groups = dict(features.get("groups", {}))
        for column, group in groups.items():
            if group not in GROUPS:
                raise ConfigError(f"column '{column}' has unknown group '{group}'")

        resolution = str(grid.get("resolution", DAILY)).lower()
        if resolution not in RESOLUTIONS:
            raise ConfigError(f"unknown resolution '{resolution}'")
        on_invalid = str(data.get("on_invalid", REJECT)).lower()
        if on_invalid not in (REJECT, ERROR):
            raise ConfigError(f"unknown invalid-event policy '{on_invalid}'")

        origin = grid.get("origin")
        if origin is not None:
            if "width" not in grid or "height" not in grid:
                raise ConfigError("an explicit grid origin needs width and height")
            origin = (float(origin[0]), float(origin[1]))

        levels = _levels(evaluation.get("coverage", list(DEFAULT_LEVELS)))
        curve_step = float(evaluation.get("curve_step", 0.01))
        if not 0 < curve_step <= 1:
            raise ConfigError(f"the curve step must lie in (0, 1], got {curve_step}")
        pooling = str(evaluation.get("pooling", MEAN)).lower()
        if pooling not in POOLINGS:
            raise ConfigError(f"unknown pooling '{pooling}'")

        strata_config = None
        if strata.get("enabled", False):
            strata_config = StrataConfig(
                column=strata.get("column", DEFAULT_STRATA_COLUMN),
                thresholds=tuple(strata.get("thresholds", DEFAULT_STRATA_THRESHOLDS)),
            )

        learner = parse_kind(str(model.get("learner", LearnerKind.RANDOM_FOREST.value)))
        hyperparams = dict(model.get("hyperparams", {}))
        seed = int(model.get("seed", 0))
        # Validates the hyperparameters of the kind
        LearnerSpec(kind=learner, hyperparams=hyperparams, seed=seed)
        grid_values = model.get("grid")
        if grid_values is not None:
            grid_values = {name: list(values) for name, values in grid_values.items()}

        folds = int(model.get("folds", 5))
        if folds < 2:
            raise ConfigError(f"cross validation needs at least two folds, got {folds}")
        k_neighbors = int(model.get("k_neighbors", 3))
        if k_neighbors < 1:
            raise ConfigError(f"k_neighbors must be positive, got {k_neighbors}")
        train_fraction = parse_fraction(model.get("train_fraction", "2/3"))
        if not 0 < train_fraction < 1:
            raise ConfigError(
                f"train fraction must lie in (0, 1), got {train_fraction}"
            )

        output_dir = os.path.normpath(
            os.path.join(base_dir, str(output.get("directory", "runs")))
        )
        return cls(
            events=path("events", required=True),
            cells=path("cells"),
            eligibility=path("eligibility"),
            weather=path("weather"),
            public_events=path("public_events"),
            start=_day(data.get("start")),
            end=_day(data.get("end")),
            on_invalid=on_invalid,
            cell_size=float(grid.get("cell_size", 200.0)),
            origin=origin,
            width=int(grid["width"]) if "width" in grid else None,
            height=int(grid["height"]) if "height" in grid else None,
            resolution=resolution,
            feature_set=feature_set,
            windows=tuple(
                int(window) for window in features.get("windows", DEFAULT_WINDOWS)
            ),
            groups=groups,
            diversity={
                name: list(columns)
                for name, columns in features.get("diversity", {}).items()
            },
            strategy=strategy,
            phi=phi,
            learner=learner,
            hyperparams=hyperparams,
            grid=grid_values,
            tune=bool(model.get("tune", False)),
            folds=folds,
            k_neighbors=k_neighbors,
            train_fraction=train_fraction,
            seed=seed,
            n_jobs=int(model.get("n_jobs", 1)),
            levels=levels,
            curve_step=curve_step,
            pooling=pooling,
            strata=strata_config,
            output=output_dir,
            geojson=bool(output.get("geojson", False)),
            plot=bool(output.get("plot", True)),
            name=str(output.get("name", strategy)),
        )

    def to_mapping(self) -> Dict[str, Any]:
        """Get the resolved configuration as TOML sections."""
        data = {
            key: getattr(self, key)
            for key in ("events", "cells", "eligibility", "weather", "public_events")
            if getattr(self, key) is not None
        }
        data["on_invalid"] = self.on_invalid
        if self.start is not None:
            data["start"] = self.start.isoformat()
        if self.end is not None:
            data["end"] = self.end.isoformat()

        grid: Dict[str, Any] = {
            "cell_size": self.cell_size,
            "resolution": self.resolution,
        }
        if self.origin is not None:
            grid.update(origin=list(self.origin), width=self.width, height=self.height)

        model: Dict[str, Any] = {
            "strategy": self.strategy,
            "learner": self.learner.value,
            "hyperparams": {
                name: value
                for name, value in self.hyperparams.items()
                if value is not None
            },
            "tune": self.tune,
            "folds": self.folds,
            "k_neighbors": self.k_neighbors,
            "train_fraction": str(self.train_fraction),
            "seed": self.seed,
            "n_jobs": self.n_jobs,
        }
        if self.phi is not None:
            model["phi"] = self.phi
        if self.grid is not None:
            model["grid"] = self.grid

        strata: Dict[str, Any] = {"enabled": self.strata is not None}
        if self.strata is not None:
            strata.update(
                column=self.strata.column, thresholds=list(self.strata.thresholds)
            )

        return {
            "Data": data,
            "Grid": grid,
            "Features": {
                "set": self.feature_set,
                "windows": list(self.windows),
                "groups": dict(self.groups),
                "diversity": dict(self.diversity),
            },
            "Model": model,
            "Evaluation": {
                "coverage": list(self.levels),
                "curve_step": self.curve_step,
                "pooling": self.pooling,
            },
            "Strata": strata,
            "Output": {
                "directory": self.output,
                "geojson": self.geojson,
                "plot": self.plot,
                "name": self.name,
            },
        }


@dataclass(frozen=True)
class MatrixConfig:
    """The experiments of every combination of the [Matrix] axes of one manifest.

    Every experiment writes to ``<output>/<name>``, where the name joins the axis
    values in the order of ``MATRIX_AXES``. The others are compared against the
    baseline experiment, the first one unless ``baseline`` names another.
    """

    experiments: Tuple[ExperimentConfig, ...]
    output: str
    baseline: str
    n_jobs: int = 1

    @classmethod
    def from_file(
        cls,
        path: str,
        overrides: Optional[Mapping[str, Any]] = None,
        n_jobs: Optional[int] = None,
    ) -> "MatrixConfig":
        """Read the matrix of an experiment manifest."""
        try:
            mapping = defaultdict(dict, toml.load(path))
        except (OSError, toml.TomlDecodeError) as error:
            raise ConfigError(f"cannot read the configuration {path}: {error}")
        base_dir = os.path.dirname(os.path.abspath(path))
        return cls.from_mapping(mapping, base_dir, overrides, n_jobs)

    @classmethod
    def from_mapping(
        cls,
        mapping: Mapping[str, Any],
        base_dir: str = ".",
        overrides: Optional[Mapping[str, Any]] = None,
        n_jobs: Optional[int] = None,
    ) -> "MatrixConfig":
        """Expand the axes into one resolved experiment per combination."""
        flags = {
            key: value for key, value in (overrides or {}).items() if value is not None
        }
        matrix = dict(mapping.get("Matrix", {}))
        workers = int(matrix.pop("n_jobs", 1))
        if n_jobs is not None:
            workers = n_jobs
        baseline = matrix.pop("baseline", None)

        axes: Dict[str, List[Any]] = {}
        for axis in MATRIX_AXES:
            if axis not in matrix:
                continue
            if axis in flags:
                raise ConfigError(f"the flag '{axis}' is also a matrix axis")
            values = matrix.pop(axis)
            values = list(values) if isinstance(values, list) else [values]
            if not values:
                raise ConfigError(f"the matrix axis '{axis}' has no values")
            if axis == "strata" and not all(isinstance(v, bool) for v in values):
                raise ConfigError("the strata axis takes true and false")
            axes[axis] = values
        if matrix:
            known = ", ".join(MATRIX_AXES)
            unknown = ", ".join(sorted(matrix))
            raise ConfigError(f"unknown matrix axes {unknown}, expected {known}")
        if not axes:
            raise ConfigError("[Matrix] needs at least one axis")

        experiments = []
        for values in itertools.product(*axes.values()):
            entry = dict(zip(axes, values))
            name = "-".join(_axis_label(axis, value) for axis, value in entry.items())
            entry_flags = {**flags, **entry, "name": name}
            # A phi flag sizes the hyper entries of a strategy axis only
            if "strategy" in entry and str(entry["strategy"]).lower() != HYPER:
                entry_flags.pop("phi", None)
            experiments.append(
                ExperimentConfig.from_mapping(
                    mapping, base_dir=base_dir, overrides=entry_flags
                )
            )

        names = [experiment.name for experiment in experiments]
        if len(set(names)) != len(names):
            raise ConfigError("the matrix axes repeat a value")
        baseline = names[0] if baseline is None else str(baseline)
        if baseline not in names:
            raise ConfigError(f"the baseline '{baseline}' is not an experiment")
        if workers == 0:
            raise ConfigError("the matrix needs at least one worker")
        return cls(tuple(experiments), experiments[0].output, baseline, workers)


def _axis_label(axis: str, value: Any) -> str:
    if axis == "strata":
        return "strata" if value else "whole"
    return str(value).lower()


def apply_overrides(
    mapping: Mapping[str, Any], overrides: Mapping[str, Any]
) -> Dict[str, Dict[str, Any]]:
    """Copy the sections and replace the values of all flags that were given."""
    sections: Dict[str, Dict[str, Any]] = defaultdict(
        dict, copy.deepcopy(dict(mapping))
    )
    for flag, value in overrides.items():
        if value is None:
            continue
        if flag not in FLAG_KEYS:
            raise ConfigError(f"unknown option '{flag}'")
        section, key = FLAG_KEYS[flag]
        sections[section][key] = value
    return sections


def _levels(values: Sequence[float]) -> Tuple[float, ...]:
    if isinstance(values, (int, float)):
        values = [values]
    levels = sorted(float(value) for value in values)
    if not levels:
        raise ConfigError("at least one coverage level is needed")
    for level in levels:
        if not 0 < level <= 1:
            raise ConfigError(f"coverage must lie in (0, 1], got {level}")
    if len(set(levels)) != len(levels):
        raise ConfigError("coverage levels must be distinct")
    return tuple(levels)


def _day(value: Any) -> Optional[date]:
    if value is None:
        return None
    if isinstance(value, date):
        return value
    return try_parse_day(str(value))
