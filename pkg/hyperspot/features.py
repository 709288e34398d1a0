"""Crime-history, locational and temporal features of the (cell, bucket) frame."""
from dataclasses import dataclass, field
from datetime import date
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.stats import entropy

from hyperspot import logger
from hyperspot.dataset import WEEKLY, SpatioTemporalFrame
from hyperspot.helpers import ConfigError, DataError, MissingCellsError, NumericError

CRIME = "crime"
SPATIAL = "spatial"
TEMPORAL = "temporal"
ALL = "all"
GROUPS = (CRIME, SPATIAL, TEMPORAL)
FEATURE_SETS = GROUPS + (ALL,)

DEFAULT_WINDOWS = (1, 3, 7, 14)

DOW_COLUMNS = [f"dow_{weekday}" for weekday in range(7)]
WEATHER_COLUMNS = ["holiday", "temp", "hum", "discomf", "daylight", "moon"]
EVENT_COLUMN = "event"

# Raw weather inputs, as read from the weather CSV
WEATHER_INPUTS = ["temp", "humidity", "daylight", "moon", "holiday"]


@dataclass(frozen=True)
class FeatureSet:
    """A named selection of feature columns."""

    selector: str
    member_names: Tuple[str, ...]


@dataclass(frozen=True)
class WeatherDay:
    """Calendar and weather attributes of a single day."""

    temp: float
    humidity: float
    daylight: float
    moon: float
    holiday: bool = False
    event_count: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        """Validate the value ranges."""
        if not 0 <= self.humidity <= 1:
            raise DataError(f"humidity must lie in [0, 1], got {self.humidity}")
        if not 0 <= self.moon <= 1:
            raise DataError(f"moon phase must lie in [0, 1], got {self.moon}")
        if not 0 <= self.daylight <= 24:
            raise DataError(f"daylight must lie in [0, 24] hours, got {self.daylight}")


class FeatureSchema:
    """Maps every feature column to one of the groups crime, spatial and temporal."""

    def __init__(self, groups: Mapping[str, str]) -> None:
        """Create a schema from a column to group mapping."""
        for column, group in groups.items():
            if group not in GROUPS:
                raise ConfigError(f"column '{column}' has unknown group '{group}'")
        self.groups: Dict[str, str] = dict(groups)

    @classmethod
    def default(
        cls,
        crime_columns: Sequence[str],
        spatial_columns: Sequence[str],
        temporal_columns: Sequence[str],
    ) -> "FeatureSchema":
        """Build the schema in which every column keeps its natural group."""
        groups: Dict[str, str] = {}
        groups.update({column: CRIME for column in crime_columns})
        groups.update({column: SPATIAL for column in spatial_columns})
        groups.update({column: TEMPORAL for column in temporal_columns})
        return cls(groups)

    def override(self, overrides: Mapping[str, str]) -> "FeatureSchema":
        """Re-assign columns to other groups."""
        unknown = [column for column in overrides if column not in self.groups]
        if unknown:
            raise ConfigError(f"cannot re-assign unknown columns {', '.join(unknown)}")
        groups = dict(self.groups)
        groups.update(overrides)
        return FeatureSchema(groups)

    def members(self, group: str) -> List[str]:
        """Get the columns of a group in schema order."""
        return [column for column, member in self.groups.items() if member == group]

    def select(self, selector: str) -> FeatureSet:
        """Get the feature set for crime, spatial, temporal or all."""
        if selector not in FEATURE_SETS:
            raise ConfigError(f"unknown feature set '{selector}'")
        groups = GROUPS if selector == ALL else (selector,)
        names = [column for group in groups for column in self.members(group)]
        return FeatureSet(selector=selector, member_names=tuple(names))


def crime_column_names(windows: Sequence[int], resolution: str) -> List[str]:
    """Get the column names of the prior crime counts."""
    unit = "w" if resolution == WEEKLY else "d"
    return [f"prior{window}{unit}" for window in windows]


def temporal_column_names(resolution: str) -> List[str]:
    """Get the column names of the temporal features."""
    calendar = [] if resolution == WEEKLY else DOW_COLUMNS
    return calendar + WEATHER_COLUMNS + [EVENT_COLUMN]


def _check_windows(windows: Sequence[int]) -> None:
    if len(windows) == 0 or any(int(window) < 1 for window in windows):
        raise ConfigError(f"crime windows must be positive, got {list(windows)}")


def prior_crime_counts(
    frame: SpatioTemporalFrame, cell: int, day: int, windows: Sequence[int]
) -> np.ndarray:
    """Count past events in a cell and its Moore neighborhood.

    For window w the count covers the buckets [day - w, day - 1], truncated at the
    start of the study period; the current bucket is never included.
    """
    _check_windows(windows)
    if day < 0:
        raise DataError(f"day must not be negative, got {day}")
    if not frame.grid.contains(cell) or not frame.grid.eligible[cell]:
        raise DataError(f"unknown cell {cell}")

    neighborhood = [cell] + frame.grid.neighbors(cell)
    counts = frame.counts[frame.counts["cell_id"].isin(neighborhood)]
    days = counts["day"].to_numpy()
    amounts = counts["count"].to_numpy()
    result = []
    for window in windows:
        in_window = (days >= day - window) & (days <= day - 1)
        result.append(int(amounts[in_window].sum()))
    return np.array(result, dtype=np.int64)


def crime_feature_table(
    frame: SpatioTemporalFrame, windows: Sequence[int] = DEFAULT_WINDOWS
) -> pd.DataFrame:
    """Compute the prior crime counts of every row of the frame at once."""
    _check_windows(windows)
    grid = frame.grid
    n_buckets = frame.n_buckets

    events = np.zeros((n_buckets, grid.height_cells, grid.width_cells), dtype=np.int32)
    rows, cols = grid.row_col(frame.counts["cell_id"].to_numpy())
    np.add.at(
        events,
        (frame.counts["day"].to_numpy(), rows, cols),
        frame.counts["count"].to_numpy(dtype=np.int32),
    )

    # Sum over the cell itself and its Moore neighborhood
    padded = np.pad(events, ((0, 0), (1, 1), (1, 1)))
    neighborhood = np.zeros_like(events)
    for d_row in (0, 1, 2):
        for d_col in (0, 1, 2):
            neighborhood += padded[
                :, d_row : d_row + grid.height_cells, d_col : d_col + grid.width_cells
            ]
    neighborhood = neighborhood.reshape(n_buckets, grid.n_cells)

    # cumulative[t] holds the events of all buckets before t
    cumulative = np.zeros((n_buckets + 1, grid.n_cells), dtype=np.int64)
    cumulative[1:] = np.cumsum(neighborhood, axis=0, dtype=np.int64)

    day = frame.table["day"].to_numpy()
    cell = frame.table["cell_id"].to_numpy()
    columns = {}
    for window, name in zip(windows, crime_column_names(windows, frame.resolution)):
        start = np.maximum(day - window, 0)
        columns[name] = cumulative[day, cell] - cumulative[start, cell]
    return pd.DataFrame(columns, index=frame.table.index)


def shannon_diversity(proportions: Sequence[float], k: Optional[int] = None) -> float:
    """Compute the Shannon entropy normalized by the maximum entropy of k categories."""
    values = np.asarray(proportions, dtype=float)
    k = values.size if k is None else k
    if k < 1 or values.size != k:
        raise DataError(f"expected {k} proportions, got {values.size}")
    if (values < 0).any():
        raise DataError("proportions must not be negative")
    if abs(values.sum() - 1.0) > 1e-9:
        raise DataError(f"proportions must sum to 1, got {values.sum()}")
    if k == 1:
        return 0.0
    diversity = entropy(values) / np.log(k)
    return float(min(1.0, max(0.0, diversity)))


def diversity_column(attributes: pd.DataFrame, categories: Sequence[str]) -> pd.Series:
    """Compute the diversity of a cell over the given category fraction columns."""
    missing = [column for column in categories if column not in attributes.columns]
    if missing:
        raise ConfigError(f"diversity needs the unknown columns {', '.join(missing)}")
    fractions = attributes[list(categories)].fillna(0.0).to_numpy(dtype=float)
    totals = fractions.sum(axis=1)

    def diversity(row: np.ndarray, total: float) -> float:
        if total <= 0:
            return 0.0
        return shannon_diversity(row / total, len(categories))

    return pd.Series(
        [diversity(row, total) for row, total in zip(fractions, totals)],
        index=attributes.index,
    )


def discomfort_index(temp: float, humidity: float) -> float:
    """Compute Thom's discomfort index from temperature and relative humidity."""
    return temp - 0.55 * (1 - humidity) * (temp - 14.5)


def temporal_features(
    day: date, weather: WeatherDay, cell_id: Optional[int] = None
) -> Dict[str, float]:
    """Compute the temporal features of a single day (and cell)."""
    values = {column: 0.0 for column in DOW_COLUMNS}
    values[DOW_COLUMNS[day.weekday()]] = 1.0
    values["holiday"] = float(weather.holiday)
    values["temp"] = float(weather.temp)
    values["hum"] = float(weather.humidity)
    values["discomf"] = discomfort_index(weather.temp, weather.humidity)
    values["daylight"] = float(weather.daylight)
    values["moon"] = float(weather.moon)
    events = weather.event_count.get(cell_id, 0) if cell_id is not None else 0
    values[EVENT_COLUMN] = float(events)
    return values


def load_weather(path: str) -> pd.DataFrame:
    """Read a weather CSV, indexed by date.

    Besides the weather columns it may contain wide event columns ``events_<cell_id>``.
    """
    try:
        raw = pd.read_csv(path)
    except (OSError, pd.errors.ParserError) as error:
        raise DataError(f"cannot read weather from {path}: {error}")
    if "date" not in raw.columns:
        raise DataError(f"{path} needs a date column")
    raw["date"] = pd.to_datetime(raw["date"]).dt.normalize()
    return raw.set_index("date").sort_index()


def load_public_events(path: str) -> pd.DataFrame:
    """Read the long form public events CSV with date, cell_id and event_count."""
    try:
        raw = pd.read_csv(path)
    except (OSError, pd.errors.ParserError) as error:
        raise DataError(f"cannot read public events from {path}: {error}")
    if not {"date", "cell_id", "event_count"}.issubset(raw.columns):
        raise DataError(f"{path} needs the columns date, cell_id and event_count")
    raw["date"] = pd.to_datetime(raw["date"]).dt.normalize()
    return raw[["date", "cell_id", "event_count"]]


def prepare_weather(weather: pd.DataFrame, period: Tuple[date, date]) -> pd.DataFrame:
    """Align the weather to every day of the period and impute the gaps.

    Gaps are filled with the previous day's value first and the column mean second.
    """
    missing = [column for column in WEATHER_INPUTS if column not in weather.columns]
    if missing:
        raise DataError(f"weather is missing the columns {', '.join(missing)}")

    days = pd.date_range(period[0], period[1], freq="D")
    aligned = weather[WEATHER_INPUTS].astype(float).reindex(days)
    gaps = int(aligned.isna().to_numpy().sum())
    if gaps:
        logger.warning(f"Imputing {gaps} missing weather values.")
    aligned = aligned.ffill().fillna(aligned.mean())
    empty = [column for column in WEATHER_INPUTS if aligned[column].isna().any()]
    if empty:
        raise DataError(f"weather has no values for {', '.join(empty)}")

    if aligned["humidity"].max() > 1:
        # Humidity given in percent
        aligned["humidity"] = aligned["humidity"] / 100.0
    return aligned


def public_event_counts(
    weather: Optional[pd.DataFrame], public_events: Optional[pd.DataFrame]
) -> pd.DataFrame:
    """Collect the public events per date and cell from the wide and long forms."""
    parts = []
    if weather is not None:
        wide = [column for column in weather.columns if column.startswith("events_")]
        if wide:
            long = (
                weather[wide]
                .rename(columns=lambda column: int(column[len("events_") :]))
                .rename_axis(columns="cell_id")
                .stack()
                .rename("event_count")
                .reset_index()
            )
            parts.append(long)
    if public_events is not None:
        parts.append(public_events)
    if not parts:
        return pd.DataFrame(columns=["date", "cell_id", "event_count"])
    return pd.concat(parts, ignore_index=True).fillna({"event_count": 0})


def temporal_feature_table(
    frame: SpatioTemporalFrame,
    weather: pd.DataFrame,
    public_events: Optional[pd.DataFrame] = None,
) -> pd.DataFrame:
    """Compute the temporal features of every row of the frame."""
    first_day, last_day = frame.period
    daily = prepare_weather(weather, frame.period)
    offsets = (daily.index - pd.Timestamp(first_day)).days.to_numpy()

    per_day = pd.DataFrame(index=daily.index)
    for weekday, column in enumerate(DOW_COLUMNS):
        per_day[column] = (daily.index.weekday == weekday).astype(float)
    per_day["holiday"] = (daily["holiday"] > 0).astype(float)
    per_day["temp"] = daily["temp"]
    per_day["hum"] = daily["humidity"]
    per_day["discomf"] = discomfort_index(daily["temp"], daily["humidity"])
    per_day["daylight"] = daily["daylight"]
    per_day["moon"] = daily["moon"]
    per_day["bucket"] = offsets // frame.bucket_days

    if frame.resolution == WEEKLY:
        per_bucket = per_day.groupby("bucket").agg(
            {
                "holiday": "max",
                "temp": "mean",
                "hum": "mean",
                "discomf": "mean",
                "daylight": "mean",
                "moon": "mean",
            }
        )
    else:
        per_bucket = per_day.set_index("bucket")[DOW_COLUMNS + WEATHER_COLUMNS]

    table = per_bucket.reindex(frame.table["day"].to_numpy())
    table.index = frame.table.index

    events = public_event_counts(weather, public_events)
    events = events[
        (events["date"] >= pd.Timestamp(first_day))
        & (events["date"] <= pd.Timestamp(last_day))
    ]
    event_buckets = (
        (events["date"] - pd.Timestamp(first_day)).dt.days // frame.bucket_days
    )
    per_cell = (
        pd.DataFrame(
            {
                "cell_id": events["cell_id"].to_numpy(dtype=np.int64),
                "day": event_buckets.to_numpy(dtype=np.int64),
                EVENT_COLUMN: events["event_count"].to_numpy(dtype=float),
            }
        )
        .groupby(["cell_id", "day"])[EVENT_COLUMN]
        .sum()
    )
    keys = pd.MultiIndex.from_arrays(
        [frame.table["cell_id"].to_numpy(), frame.table["day"].to_numpy()]
    )
    table[EVENT_COLUMN] = per_cell.reindex(keys, fill_value=0.0).to_numpy()
    return table[temporal_column_names(frame.resolution)]


def spatial_feature_table(
    frame: SpatioTemporalFrame,
    attributes: pd.DataFrame,
    diversity: Optional[Mapping[str, Sequence[str]]] = None,
) -> pd.DataFrame:
    """Broadcast the static cell attributes to every row of the frame."""
    missing = [cell for cell in frame.cells if cell not in attributes.index]
    if missing:
        raise MissingCellsError("the cell attribute table", missing)

    static = attributes.copy()
    for name, categories in (diversity or {}).items():
        static[name] = diversity_column(attributes, categories)

    non_numeric = [
        column
        for column in static.columns
        if not pd.api.types.is_numeric_dtype(static[column])
    ]
    if non_numeric:
        raise DataError(f"cell attributes are not numeric: {', '.join(non_numeric)}")
    static = static.astype(float)
    if static.isna().to_numpy().any():
        logger.warning("Imputing missing cell attributes with the column mean.")
        static = static.fillna(static.mean()).fillna(0.0)

    table = static.reindex(frame.table["cell_id"].to_numpy())
    table.index = frame.table.index
    return table


def assemble(
    frame: SpatioTemporalFrame,
    static_attrs: Optional[pd.DataFrame],
    weather: Optional[pd.DataFrame],
    feature_set: Union[str, FeatureSet] = ALL,
    windows: Sequence[int] = DEFAULT_WINDOWS,
    public_events: Optional[pd.DataFrame] = None,
    diversity: Optional[Mapping[str, Sequence[str]]] = None,
    overrides: Optional[Mapping[str, str]] = None,
) -> SpatioTemporalFrame:
    """Attach the selected feature columns to the frame.

    Crime columns only count events of strictly earlier buckets.
    """
    crime_names = crime_column_names(windows, frame.resolution)
    spatial_names: List[str] = []
    if static_attrs is not None:
        spatial_names = list(static_attrs.columns) + list((diversity or {}).keys())
    temporal_names = temporal_column_names(frame.resolution)

    schema = FeatureSchema.default(crime_names, spatial_names, temporal_names)
    if overrides:
        schema = schema.override(overrides)
    if isinstance(feature_set, FeatureSet):
        selected = feature_set
    else:
        selected = schema.select(feature_set)
    if not selected.member_names:
        raise ConfigError(f"feature set '{selected.selector}' has no columns")

    needed = set(selected.member_names)
    parts = []
    if needed & set(crime_names):
        parts.append(crime_feature_table(frame, windows))
    if needed & set(spatial_names):
        if static_attrs is None:
            raise ConfigError("spatial features need a cell attribute table")
        parts.append(spatial_feature_table(frame, static_attrs, diversity))
    if needed & set(temporal_names):
        if weather is None:
            raise ConfigError("temporal features need a weather table")
        parts.append(temporal_feature_table(frame, weather, public_events))

    if parts:
        features = pd.concat(parts, axis=1)
    else:
        features = pd.DataFrame(index=frame.table.index)
    unknown = [name for name in selected.member_names if name not in features.columns]
    if unknown:
        raise ConfigError(f"unknown feature columns {', '.join(unknown)}")
    features = features[list(selected.member_names)].astype(float)
    if not np.isfinite(features.to_numpy()).all():
        raise NumericError("assembled features contain non-finite values")

    base = frame.table[["cell_id", "day", "label"]]
    table = pd.concat([base, features], axis=1)
    logger.debug(
        f"Assembled {len(selected.member_names)} '{selected.selector}' features "
        f"for {len(table):,d} rows."
    )
    return frame.with_table(table, selected.member_names)


def weather_day(weather: pd.DataFrame, day: date) -> WeatherDay:
    """Get the weather of a single day from a prepared weather table."""
    row = weather.loc[pd.Timestamp(day)]
    return WeatherDay(
        temp=float(row["temp"]),
        humidity=float(row["humidity"]),
        daylight=float(row["daylight"]),
        moon=float(row["moon"]),
        holiday=bool(row["holiday"] > 0),
    )
