"""The grid, the event records, the (cell, bucket) frame and chronological splits."""
import math
from dataclasses import dataclass, replace
from datetime import date, timedelta
from fractions import Fraction
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from hyperspot import logger
from hyperspot.helpers import CannotInferExtentError, ConfigError, DataError

DAILY = "daily"
WEEKLY = "weekly"
RESOLUTIONS = (DAILY, WEEKLY)

REJECT = "reject"
ERROR = "error"

# Stages which are allowed to read rows after the split boundary
EVALUATION_STAGES = ("evaluate", "rank")

Bounds = Tuple[Tuple[float, float], int, int]
Eligibility = Union[None, Sequence[bool], np.ndarray, pd.DataFrame]


@dataclass(frozen=True)
class EventRecord:
    """A single reported offense."""

    x: float
    y: float
    date: date


@dataclass(frozen=True, eq=False)
class GridSpec:
    """A regular grid of square cells with an eligibility mask.

    Cell ids are assigned row by row, starting at the origin:
    ``cell_id = row * width_cells + col``.
    """

    cell_size: float
    origin: Tuple[float, float]
    width_cells: int
    height_cells: int
    eligible: np.ndarray

    def __post_init__(self) -> None:
        """Validate the grid and freeze the mask."""
        if not self.cell_size > 0:
            raise DataError(f"cell size must be positive, got {self.cell_size}")
        if self.width_cells < 1 or self.height_cells < 1:
            raise DataError(
                f"grid must have at least one cell, got "
                f"{self.width_cells} x {self.height_cells}"
            )
        mask = np.array(self.eligible, dtype=bool).reshape(-1)
        if mask.size != self.width_cells * self.height_cells:
            raise DataError(
                f"eligibility mask has {mask.size} entries, "
                f"expected {self.width_cells * self.height_cells}"
            )
        mask.setflags(write=False)
        object.__setattr__(self, "eligible", mask)
        origin = (float(self.origin[0]), float(self.origin[1]))
        object.__setattr__(self, "origin", origin)

    @property
    def n_cells(self) -> int:
        """The total number of cells, eligible or not."""
        return self.width_cells * self.height_cells

    @property
    def eligible_cells(self) -> np.ndarray:
        """The ids of all eligible cells in ascending order."""
        return np.flatnonzero(self.eligible)

    @property
    def n_eligible(self) -> int:
        """The number of eligible cells."""
        return int(self.eligible.sum())

    def contains(self, cell_id: int) -> bool:
        """Check whether the id refers to a cell of this grid."""
        return 0 <= cell_id < self.n_cells

    def row_col(
        self, cell_ids: Union[int, np.ndarray]
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Get the row and column of the given cells."""
        return np.divmod(np.asarray(cell_ids), self.width_cells)

    def cell_of(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Map planar coordinates to cell ids; -1 marks points outside the grid."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        col = np.floor((x - self.origin[0]) / self.cell_size).astype(np.int64)
        row = np.floor((y - self.origin[1]) / self.cell_size).astype(np.int64)

        # The upper edge of the extent belongs to the last column/row
        max_x = self.origin[0] + self.width_cells * self.cell_size
        max_y = self.origin[1] + self.height_cells * self.cell_size
        col = np.where((col == self.width_cells) & (x <= max_x), col - 1, col)
        row = np.where((row == self.height_cells) & (y <= max_y), row - 1, row)

        inside = (
            (col >= 0)
            & (col < self.width_cells)
            & (row >= 0)
            & (row < self.height_cells)
        )
        return np.where(inside, row * self.width_cells + col, -1)

    def centroids(self, cell_ids: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
        """Get the planar coordinates of the cell centers."""
        rows, cols = self.row_col(np.asarray(cell_ids))
        xs = self.origin[0] + (cols + 0.5) * self.cell_size
        ys = self.origin[1] + (rows + 0.5) * self.cell_size
        return xs, ys

    def neighbors(self, cell_id: int) -> List[int]:
        """Get the Moore neighborhood of a cell, truncated at the grid edges."""
        if not self.contains(cell_id):
            raise DataError(f"unknown cell {cell_id}")
        row, col = divmod(int(cell_id), self.width_cells)
        result = []
        for d_row in (-1, 0, 1):
            for d_col in (-1, 0, 1):
                if d_row == 0 and d_col == 0:
                    continue
                n_row, n_col = row + d_row, col + d_col
                if 0 <= n_row < self.height_cells and 0 <= n_col < self.width_cells:
                    result.append(n_row * self.width_cells + n_col)
        return result


class ReadAudit:
    """Records which buckets each pipeline stage reads from a split frame."""

    def __init__(self) -> None:
        """Create an empty audit."""
        self.stage = "ingest"
        self.reads: List[Tuple[str, int, int]] = []

    def record(self, first: int, last: int) -> None:
        """Record a read of the bucket range [first, last] by the current stage."""
        self.reads.append((self.stage, int(first), int(last)))

    def leaks(self, boundary: int) -> List[Tuple[str, int, int]]:
        """Get all reads of test buckets made outside of the evaluation stages."""
        return [
            read
            for read in self.reads
            if read[2] >= boundary and read[0] not in EVALUATION_STAGES
        ]

    def assert_no_leak(self, boundary: int) -> None:
        """Raise a DataError if a stage read test rows before evaluation."""
        leaks = self.leaks(boundary)
        if leaks:
            stages = sorted({stage for stage, _, _ in leaks})
            raise DataError(f"test rows read before evaluation by: {', '.join(stages)}")


@dataclass(frozen=True, eq=False)
class SpatioTemporalFrame:
    """The design matrix: one row per (eligible cell, time bucket).

    ``table`` holds the columns ``cell_id``, ``day`` (the bucket index), ``label`` and
    the feature columns, ordered bucket-major and then by cell id. ``counts`` is the
    event index of the whole study period (``cell_id``, ``day``, ``count``); it is
    shared by every frame derived from the same ingest.
    """

    table: pd.DataFrame
    feature_names: Tuple[str, ...]
    period: Tuple[date, date]
    grid: GridSpec
    resolution: str
    counts: pd.DataFrame
    audit: Optional[ReadAudit] = None

    def __len__(self) -> int:
        """Get the number of rows."""
        return len(self.table)

    @property
    def bucket_days(self) -> int:
        """The number of calendar days per bucket."""
        return 7 if self.resolution == WEEKLY else 1

    @property
    def n_buckets(self) -> int:
        """The number of buckets in the study period."""
        n_days = (self.period[1] - self.period[0]).days + 1
        return math.ceil(n_days / self.bucket_days)

    @property
    def days(self) -> np.ndarray:
        """The distinct bucket indices present in the frame."""
        return np.unique(self.table["day"].to_numpy())

    @property
    def cells(self) -> np.ndarray:
        """The distinct cell ids present in the frame."""
        return np.unique(self.table["cell_id"].to_numpy())

    def bucket_date(self, bucket: int) -> date:
        """Get the first calendar day of a bucket."""
        return self.period[0] + timedelta(days=int(bucket) * self.bucket_days)

    def bucket_of(self, day: date) -> int:
        """Get the bucket containing a calendar day."""
        offset = (day - self.period[0]).days
        if offset < 0 or day > self.period[1]:
            raise DataError(f"{day.isoformat()} is outside of the study period")
        return offset // self.bucket_days

    def xy(self) -> Tuple[np.ndarray, np.ndarray]:
        """Get the feature matrix and the labels."""
        self._record(self.table)
        features = self.table[list(self.feature_names)].to_numpy(dtype=float)
        labels = self.table["label"].to_numpy(dtype=np.int64)
        return features, labels

    def rows_for_day(self, bucket: int) -> pd.DataFrame:
        """Get the rows of a single bucket."""
        rows = self.table[self.table["day"] == bucket]
        self._record(rows)
        return rows

    def with_table(
        self, table: pd.DataFrame, feature_names: Optional[Sequence[str]] = None
    ) -> "SpatioTemporalFrame":
        """Derive a frame with another table."""
        names = self.feature_names if feature_names is None else tuple(feature_names)
        return replace(self, table=table.reset_index(drop=True), feature_names=names)

    def _record(self, rows: pd.DataFrame) -> None:
        if self.audit is not None and len(rows) > 0:
            self.audit.record(rows["day"].min(), rows["day"].max())


class ChronoSplit(NamedTuple):
    train: SpatioTemporalFrame
    test: SpatioTemporalFrame
    boundary_day: int


class ClassBalance(NamedTuple):
    positives: int
    negatives: int
    ratio: float


def events_frame(events: Union[pd.DataFrame, Sequence[EventRecord]]) -> pd.DataFrame:
    """Normalize events into a data frame with the columns x, y and date."""
    if isinstance(events, pd.DataFrame):
        frame = events
    else:
        frame = pd.DataFrame(
            {
                "x": [event.x for event in events],
                "y": [event.y for event in events],
                "date": [event.date for event in events],
            }
        )
    if "date" not in frame.columns and "date_from" in frame.columns:
        # Interval reports are assigned to the start of the interval
        frame = frame.rename(columns={"date_from": "date"})
    missing = [column for column in ("x", "y", "date") if column not in frame.columns]
    if missing:
        raise DataError(f"events are missing the columns {', '.join(missing)}")
    try:
        dates = pd.to_datetime(frame["date"]).dt.normalize()
    except (ValueError, TypeError) as error:
        raise DataError(f"invalid event date: {error}")
    return pd.DataFrame(
        {
            "x": frame["x"].to_numpy(dtype=float),
            "y": frame["y"].to_numpy(dtype=float),
            "date": dates.to_numpy(),
        }
    )


def load_events(path: str) -> pd.DataFrame:
    """Read an events CSV with the columns x, y and date."""
    try:
        raw = pd.read_csv(path)
    except (OSError, pd.errors.ParserError) as error:
        raise DataError(f"cannot read events from {path}: {error}")
    return events_frame(raw)


def load_eligibility(path: str) -> pd.DataFrame:
    """Read an eligibility CSV with the columns cell_id and eligible."""
    try:
        raw = pd.read_csv(path)
    except (OSError, pd.errors.ParserError) as error:
        raise DataError(f"cannot read eligibility from {path}: {error}")
    if not {"cell_id", "eligible"}.issubset(raw.columns):
        raise DataError(f"{path} needs the columns cell_id and eligible")
    return raw[["cell_id", "eligible"]].astype({"cell_id": np.int64, "eligible": bool})


def load_cell_attributes(path: str) -> pd.DataFrame:
    """Read the static cell attributes, indexed by cell id."""
    try:
        raw = pd.read_csv(path)
    except (OSError, pd.errors.ParserError) as error:
        raise DataError(f"cannot read cell attributes from {path}: {error}")
    if "cell_id" not in raw.columns:
        raise DataError(f"{path} needs a cell_id column")
    return raw.set_index("cell_id").sort_index()


def _eligibility_mask(eligibility: Eligibility, n_cells: int) -> np.ndarray:
    if eligibility is None:
        return np.ones(n_cells, dtype=bool)
    if isinstance(eligibility, pd.DataFrame):
        mask = np.zeros(n_cells, dtype=bool)
        cell_ids = eligibility["cell_id"].to_numpy(dtype=np.int64)
        outside = (cell_ids < 0) | (cell_ids >= n_cells)
        if outside.any():
            raise DataError(
                f"eligibility lists {int(outside.sum())} cells outside of the grid"
            )
        if len(np.unique(cell_ids)) < n_cells:
            logger.warning(
                f"Eligibility lists {len(np.unique(cell_ids))} of {n_cells} cells, "
                "the others are treated as ineligible."
            )
        mask[cell_ids] = eligibility["eligible"].to_numpy(dtype=bool)
        return mask
    return np.asarray(eligibility, dtype=bool).reshape(-1)


def build_grid(
    events: Union[pd.DataFrame, Sequence[EventRecord]],
    cell_size: float = 200.0,
    eligibility: Eligibility = None,
    bounds: Optional[Bounds] = None,
) -> GridSpec:
    """Discretize the study area into square cells.

    Without explicit bounds ``(origin, width_cells, height_cells)`` the grid covers the
    bounding box of the events.
    """
    if not cell_size > 0:
        raise DataError(f"cell size must be positive, got {cell_size}")

    if bounds is not None:
        origin, width, height = bounds
    else:
        frame = events_frame(events)
        if len(frame) == 0:
            raise CannotInferExtentError()
        min_x, max_x = frame["x"].min(), frame["x"].max()
        min_y, max_y = frame["y"].min(), frame["y"].max()
        origin = (min_x, min_y)
        width = max(1, math.ceil((max_x - min_x) / cell_size))
        height = max(1, math.ceil((max_y - min_y) / cell_size))

    mask = _eligibility_mask(eligibility, width * height)
    return GridSpec(
        cell_size=float(cell_size),
        origin=origin,
        width_cells=int(width),
        height_cells=int(height),
        eligible=mask,
    )


def build_frame(
    grid: GridSpec,
    events: Union[pd.DataFrame, Sequence[EventRecord]],
    period: Tuple[date, date],
    resolution: str = DAILY,
    on_invalid: str = REJECT,
) -> SpatioTemporalFrame:
    """Build the labelled (cell, bucket) frame.

    The label of a row is 1 iff at least one event fell into the cell during the bucket.
    Events outside the grid or in ineligible cells are dropped with a warning when
    ``on_invalid`` is "reject" and raise a DataError when it is "error".
    """
    if resolution not in RESOLUTIONS:
        raise ConfigError(f"unknown resolution '{resolution}'")
    if on_invalid not in (REJECT, ERROR):
        raise ConfigError(f"unknown invalid-event policy '{on_invalid}'")
    first_day, last_day = period
    if last_day < first_day:
        raise DataError("the study period ends before it starts")

    eligible_cells = grid.eligible_cells
    if eligible_cells.size == 0:
        raise DataError("the grid has no eligible cells")

    frame = events_frame(events)
    offsets = (
        pd.to_datetime(frame["date"]) - pd.Timestamp(first_day)
    ).dt.days.to_numpy()
    n_days = (last_day - first_day).days + 1
    outside_period = (offsets < 0) | (offsets >= n_days)
    if outside_period.any():
        raise DataError(
            f"{int(outside_period.sum())} events lie outside of the study period "
            f"{first_day.isoformat()} to {last_day.isoformat()}"
        )

    cells = grid.cell_of(frame["x"].to_numpy(), frame["y"].to_numpy())
    valid = cells >= 0
    valid[valid] = grid.eligible[cells[valid]]
    if not valid.all():
        invalid_count = int((~valid).sum())
        if on_invalid == ERROR:
            raise DataError(
                f"{invalid_count} events lie outside of the grid or in ineligible cells"
            )
        logger.warning(
            f"Rejected {invalid_count} events outside the grid or in ineligible cells."
        )

    bucket_days = 7 if resolution == WEEKLY else 1
    n_buckets = math.ceil(n_days / bucket_days)
    counts = (
        pd.DataFrame({"cell_id": cells[valid], "day": offsets[valid] // bucket_days})
        .groupby(["cell_id", "day"])
        .size()
        .rename("count")
        .reset_index()
        .astype(np.int64)
    )

    n_eligible = eligible_cells.size
    labels = np.zeros(n_buckets * n_eligible, dtype=np.int64)
    positions = np.searchsorted(eligible_cells, counts["cell_id"].to_numpy())
    labels[counts["day"].to_numpy() * n_eligible + positions] = 1

    table = pd.DataFrame(
        {
            "cell_id": np.tile(eligible_cells, n_buckets),
            "day": np.repeat(np.arange(n_buckets, dtype=np.int64), n_eligible),
            "label": labels,
        }
    )
    return SpatioTemporalFrame(
        table=table,
        feature_names=(),
        period=(first_day, last_day),
        grid=grid,
        resolution=resolution,
        counts=counts,
    )


def parse_fraction(value: Union[str, float, Fraction]) -> Fraction:
    """Parse a ratio such as 0.5 or "2/3" exactly."""
    try:
        if isinstance(value, str):
            fraction = Fraction(value.strip())
        else:
            fraction = Fraction(value).limit_denominator(10 ** 6)
    except (ValueError, ZeroDivisionError, TypeError):
        raise ConfigError(f"invalid fraction '{value}'")
    return fraction


def chronological_split(
    frame: SpatioTemporalFrame,
    train_fraction: Union[str, float, Fraction],
    audit: Optional[ReadAudit] = None,
) -> ChronoSplit:
    """Split the frame at a bucket boundary, keeping the chronological order.

    The boundary is ``floor(train_fraction * buckets)``, so a partial future bucket
    never leaks into the training data.
    """
    fraction = parse_fraction(train_fraction)
    if not 0 < fraction < 1:
        raise ConfigError(f"train fraction must lie in (0, 1), got {train_fraction}")

    buckets = frame.days
    if buckets.size < 2:
        raise DataError("a split needs at least two time buckets")
    boundary_index = math.floor(fraction * buckets.size)
    if boundary_index < 1 or boundary_index >= buckets.size:
        raise DataError(
            f"train fraction {train_fraction} leaves an empty train or test set"
        )
    boundary = int(buckets[boundary_index])

    in_train = frame.table["day"].to_numpy() < boundary
    train = replace(frame.with_table(frame.table[in_train]), audit=audit)
    test = replace(frame.with_table(frame.table[~in_train]), audit=audit)
    return ChronoSplit(train=train, test=test, boundary_day=boundary)


def class_balance(frame: SpatioTemporalFrame) -> ClassBalance:
    """Count positive and negative rows."""
    total = len(frame)
    if total == 0:
        raise DataError("cannot compute the class balance of an empty frame")
    positives = int(frame.table["label"].sum())
    return ClassBalance(
        positives=positives, negatives=total - positives, ratio=positives / total
    )


def restrict_cells(
    frame: SpatioTemporalFrame, cell_ids: Sequence[int]
) -> SpatioTemporalFrame:
    """Get the sub-frame of the given cells."""
    keep = frame.table["cell_id"].isin(np.asarray(cell_ids))
    return frame.with_table(frame.table[keep.to_numpy()])
