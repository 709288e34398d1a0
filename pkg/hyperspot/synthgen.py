"""Synthetic event data with a known risk surface and near-repeat victimization.

The daily event indicator of every eligible cell is a Bernoulli draw with

    risk = expit(intercept + static score + weekday effect + near-repeat boost)

where the boost grows with the events of the cell (and, weaker, of its Moore
neighbors) during the last ``decay_days`` days. The intercept is calibrated so that
the share of positive (cell, day) rows matches the configured target.
"""
import math
import os
from dataclasses import dataclass
from datetime import date, timedelta
from typing import Any, Dict, List, Tuple

import numpy as np
import pandas as pd
import toml
from scipy.special import expit

from hyperspot import logger
from hyperspot.dataset import SpatioTemporalFrame
from hyperspot.helpers import ConfigError, DataError

FLOAT_FORMAT = "%.17g"

# Fixed-date public holidays as (month, day)
HOLIDAYS = ((1, 1), (8, 1), (12, 25), (12, 26))

LUNAR_CYCLE_DAYS = 29.53
NEW_MOON = date(2000, 1, 6)

CALIBRATION_STEPS = 60


@dataclass(frozen=True)
class SynthConfig:
    """The parameters of a synthetic study area."""

    width_cells: int = 50
    height_cells: int = 40
    days: int = 730
    start: date = date(2015, 1, 1)
    cell_size: float = 200.0
    origin: Tuple[float, float] = (0.0, 0.0)
    target_fraction: float = 6e-4
    n_static: int = 4
    effect_weights: Tuple[float, ...] = (0.8, 0.6, -0.4, 0.0)
    boost: float = 1.5
    decay_days: int = 14
    neighbor_boost: float = 0.5
    dow_weights: Tuple[float, ...] = (0.0, 0.0, 0.0, 0.0, 0.15, 0.3, -0.2)
    eligible_fraction: float = 0.95
    public_event_rate: float = 0.01
    seed: int = 0

    def __post_init__(self) -> None:
        """Validate the parameters."""
        if self.width_cells < 1 or self.height_cells < 1:
            raise ConfigError("the synthetic grid needs at least one cell")
        if self.days < 2:
            raise ConfigError(
                f"the synthetic period needs at least two days, got {self.days}"
            )
        if not 0 < self.target_fraction <= 0.05:
            raise ConfigError(
                f"target fraction must lie in (0, 0.05], got {self.target_fraction}"
            )
        if self.n_static < 1 or len(self.effect_weights) != self.n_static:
            raise ConfigError(
                f"expected {self.n_static} effect weights, "
                f"got {len(self.effect_weights)}"
            )
        if len(self.dow_weights) != 7:
            raise ConfigError(
                f"expected 7 weekday weights, got {len(self.dow_weights)}"
            )
        if self.decay_days < 0:
            raise ConfigError(f"decay days must not be negative, got {self.decay_days}")
        if self.boost < 0 or self.neighbor_boost < 0:
            raise ConfigError("near-repeat boosts must not be negative")
        if not 0 < self.eligible_fraction <= 1:
            raise ConfigError(
                f"eligible fraction must lie in (0, 1], got {self.eligible_fraction}"
            )
        if self.public_event_rate < 0:
            raise ConfigError("the public event rate must not be negative")

    @property
    def n_cells(self) -> int:
        """The number of cells of the grid."""
        return self.width_cells * self.height_cells

    @property
    def end(self) -> date:
        """The last day of the period."""
        return self.start + timedelta(days=self.days - 1)


@dataclass(frozen=True, eq=False)
class SyntheticDataset:
    """Generated inputs in the formats of the CSV loaders plus the true risk."""

    config: SynthConfig
    events: pd.DataFrame
    cells: pd.DataFrame
    eligibility: pd.DataFrame
    weather: pd.DataFrame
    public_events: pd.DataFrame
    truth: pd.DataFrame
    intercept: float

    @property
    def positive_fraction(self) -> float:
        """The share of positive rows among the eligible (cell, day) rows."""
        n_eligible = int(self.eligibility["eligible"].sum())
        return len(self.events) / (n_eligible * self.config.days)


def _neighbor_sum(values: np.ndarray, height: int, width: int) -> np.ndarray:
    """Sum the values of the eight Moore neighbors of every cell."""
    grid = values.reshape(height, width)
    padded = np.pad(grid, 1)
    total = np.zeros_like(grid)
    for d_row in (0, 1, 2):
        for d_col in (0, 1, 2):
            if d_row == 1 and d_col == 1:
                continue
            total += padded[d_row : d_row + height, d_col : d_col + width]
    return total.reshape(-1)


def _simulate(
    config: SynthConfig,
    intercept: float,
    base_score: np.ndarray,
    weekday_score: np.ndarray,
    eligible: np.ndarray,
    uniforms: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """Run the daily recurrence; returns the event indicators and the risks."""
    n_days, n_cells = uniforms.shape
    events = np.zeros((n_days, n_cells), dtype=bool)
    risk = np.zeros((n_days, n_cells))
    recent = np.zeros(n_cells)
    for day in range(n_days):
        if config.decay_days > 0 and day > 0:
            recent += events[day - 1]
            if day - 1 - config.decay_days >= 0:
                recent -= events[day - 1 - config.decay_days]
        pressure = recent + config.neighbor_boost * _neighbor_sum(
            recent, config.height_cells, config.width_cells
        )
        logits = intercept + base_score + weekday_score[day] + config.boost * pressure
        risk[day] = np.where(eligible, expit(logits), 0.0)
        events[day] = uniforms[day] < risk[day]
    return events, risk


def _calibrate(
    config: SynthConfig,
    base_score: np.ndarray,
    weekday_score: np.ndarray,
    eligible: np.ndarray,
    uniforms: np.ndarray,
) -> float:
    """Bisect the intercept until the simulated positive count meets the target.

    The uniforms are fixed, so the count is monotone in the intercept.
    """
    target = config.target_fraction * int(eligible.sum()) * config.days
    low, high = -40.0, 10.0
    for _ in range(CALIBRATION_STEPS):
        middle = (low + high) / 2
        events, _ = _simulate(
            config, middle, base_score, weekday_score, eligible, uniforms
        )
        count = int(events.sum())
        if count == round(target):
            return middle
        if count < target:
            low = middle
        else:
            high = middle
    return (low + high) / 2


def weather_table(config: SynthConfig, rng: np.random.Generator) -> pd.DataFrame:
    """Generate seasonal daily weather with a lunar cycle and fixed holidays."""
    days = [config.start + timedelta(days=offset) for offset in range(config.days)]
    day_of_year = np.array([day.timetuple().tm_yday for day in days], dtype=float)
    season = 2 * math.pi / 365.25

    temp = (
        10
        + 10 * np.sin(season * (day_of_year - 110))
        + rng.normal(0, 3, config.days)
    )
    humidity = np.clip(
        0.7 - 0.01 * (temp - 10) + rng.normal(0, 0.08, config.days), 0.2, 1.0
    )
    daylight = 12.2 + 3.9 * np.sin(season * (day_of_year - 80))
    lunar_age = np.array([(day - NEW_MOON).days for day in days]) % LUNAR_CYCLE_DAYS
    moon = (1 - np.cos(2 * math.pi * lunar_age / LUNAR_CYCLE_DAYS)) / 2
    holiday = [int((day.month, day.day) in HOLIDAYS) for day in days]

    return pd.DataFrame(
        {
            "date": [day.isoformat() for day in days],
            "temp": temp,
            "humidity": humidity,
            "daylight": daylight,
            "moon": moon,
            "holiday": holiday,
        }
    )


def generate(config: SynthConfig) -> SyntheticDataset:
    """Generate a synthetic study area; the same config always gives the same data."""
    rng = np.random.default_rng(config.seed)
    n_cells = config.n_cells

    eligible = rng.random(n_cells) < config.eligible_fraction
    if not eligible.any():
        eligible[0] = True

    log_popdens = rng.normal(1.5, 1.2, n_cells)
    static = rng.normal(0.0, 1.0, (n_cells, config.n_static - 1))
    standardized = np.column_stack(
        [(log_popdens - log_popdens.mean()) / log_popdens.std(), static]
    )
    base_score = standardized @ np.asarray(config.effect_weights, dtype=float)

    weekdays = np.array(
        [
            (config.start + timedelta(days=offset)).weekday()
            for offset in range(config.days)
        ]
    )
    weekday_score = np.asarray(config.dow_weights, dtype=float)[weekdays]

    uniforms = rng.random((config.days, n_cells))
    intercept = _calibrate(config, base_score, weekday_score, eligible, uniforms)
    events, risk = _simulate(
        config, intercept, base_score, weekday_score, eligible, uniforms
    )
    logger.info(
        f"Generated {int(events.sum()):,d} events on {int(eligible.sum()):,d} eligible "
        f"cells over {config.days} days (intercept {intercept:.3f})."
    )

    event_days, event_cells = np.nonzero(events)
    rows, cols = np.divmod(event_cells, config.width_cells)
    offsets = rng.random((event_cells.size, 2))
    event_table = pd.DataFrame(
        {
            "x": config.origin[0] + (cols + offsets[:, 0]) * config.cell_size,
            "y": config.origin[1] + (rows + offsets[:, 1]) * config.cell_size,
            "date": [
                (config.start + timedelta(days=int(day))).isoformat()
                for day in event_days
            ],
        }
    )

    cells = pd.DataFrame(
        {"cell_id": np.arange(n_cells), "popdens": np.exp(log_popdens)}
    )
    for column in range(1, config.n_static):
        cells[f"attr_{column}"] = static[:, column - 1]

    weather = weather_table(config, rng)

    public = rng.poisson(config.public_event_rate, (config.days, n_cells))
    public[:, ~eligible] = 0
    public_days, public_cells = np.nonzero(public)
    public_events = pd.DataFrame(
        {
            "date": [
                (config.start + timedelta(days=int(day))).isoformat()
                for day in public_days
            ],
            "cell_id": public_cells,
            "event_count": public[public_days, public_cells],
        }
    )

    eligible_cells = np.flatnonzero(eligible)
    truth = pd.DataFrame(
        {
            "cell_id": np.tile(eligible_cells, config.days),
            "day": np.repeat(np.arange(config.days), eligible_cells.size),
            "risk": risk[:, eligible_cells].reshape(-1),
        }
    )

    return SyntheticDataset(
        config=config,
        events=event_table,
        cells=cells,
        eligibility=pd.DataFrame(
            {"cell_id": np.arange(n_cells), "eligible": eligible.astype(int)}
        ),
        weather=weather,
        public_events=public_events,
        truth=truth,
        intercept=float(intercept),
    )


def experiment_manifest(config: SynthConfig) -> Dict[str, Any]:
    """Get a ready-to-run experiment configuration for the written files."""
    return {
        "Data": {
            "events": "events.csv",
            "cells": "cells.csv",
            "eligibility": "eligibility.csv",
            "weather": "weather.csv",
            "public_events": "public_events.csv",
            "start": config.start.isoformat(),
            "end": config.end.isoformat(),
        },
        "Grid": {
            "cell_size": config.cell_size,
            "origin": list(config.origin),
            "width": config.width_cells,
            "height": config.height_cells,
            "resolution": "daily",
        },
        "Features": {"set": "all"},
        "Model": {
            "strategy": "hyper",
            "phi": 10,
            "learner": "random_forest",
            "seed": config.seed,
        },
        "Output": {"directory": "runs"},
    }


def write_dataset(dataset: SyntheticDataset, directory: str) -> List[str]:
    """Write all files of a dataset and a matching experiment.toml to the directory.

    Returns the paths of the written files.
    """
    try:
        os.makedirs(directory, exist_ok=True)
    except OSError as error:
        raise DataError(f"cannot create {directory}: {error}")

    tables = {
        "events.csv": dataset.events,
        "cells.csv": dataset.cells,
        "eligibility.csv": dataset.eligibility,
        "weather.csv": dataset.weather,
        "public_events.csv": dataset.public_events,
        "truth.csv": dataset.truth,
    }
    for name, table in tables.items():
        table.to_csv(
            os.path.join(directory, name),
            index=False,
            float_format=FLOAT_FORMAT,
            encoding="utf-8",
        )
    manifest_path = os.path.join(directory, "experiment.toml")
    with open(manifest_path, "w", encoding="utf-8") as file:
        toml.dump(experiment_manifest(dataset.config), file)

    return [os.path.join(directory, name) for name in tables] + [manifest_path]


def truth_scores(truth: pd.DataFrame, frame: SpatioTemporalFrame) -> np.ndarray:
    """Align the true daily risk with the rows of a daily frame."""
    indexed = truth.set_index(["cell_id", "day"])["risk"]
    keys = pd.MultiIndex.from_arrays(
        [frame.table["cell_id"].to_numpy(), frame.table["day"].to_numpy()]
    )
    scores = indexed.reindex(keys).to_numpy()
    if np.isnan(scores).any():
        raise DataError("the truth table does not cover every row of the frame")
    return scores
