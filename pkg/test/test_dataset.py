import math
from datetime import date, timedelta
from fractions import Fraction
from typing import List, Tuple

import numpy as np
import pandas as pd
from pytest import mark, raises

from hyperspot.dataset import (
    ERROR,
    WEEKLY,
    EventRecord,
    GridSpec,
    ReadAudit,
    SpatioTemporalFrame,
    build_frame,
    build_grid,
    chronological_split,
    class_balance,
    events_frame,
    parse_fraction,
    restrict_cells,
)
from hyperspot.helpers import CannotInferExtentError, ConfigError, DataError

PERIOD = (date(2016, 1, 1), date(2016, 1, 3))


def make_grid(width: int = 3, height: int = 2, size: float = 10.0) -> GridSpec:
    """Create a fully eligible grid anchored at the origin."""
    return GridSpec(
        cell_size=size,
        origin=(0.0, 0.0),
        width_cells=width,
        height_cells=height,
        eligible=np.ones(width * height, dtype=bool),
    )


def small_frame() -> SpatioTemporalFrame:
    """Create a frame of two cells over three days."""
    events = [
        EventRecord(5, 5, date(2016, 1, 1)),
        EventRecord(15, 5, date(2016, 1, 2)),
        EventRecord(5, 5, date(2016, 1, 2)),
        EventRecord(6, 4, date(2016, 1, 2)),
    ]
    return build_frame(make_grid(width=2, height=1), events, PERIOD)


@mark.parametrize(
    "x,y,expected",
    [
        (5, 5, 0),
        (25, 5, 2),
        (15, 15, 4),
        (30, 20, 5),
        (0, 0, 0),
        (-1, 0, -1),
        (31, 5, -1),
    ],
)
def test_cell_of(x: float, y: float, expected: int) -> None:
    """Test that points map to row-major cell ids and the upper edge is inside."""
    assert make_grid().cell_of(np.array([x]), np.array([y]))[0] == expected


@mark.parametrize(
    "width,height,cell_id,expected",
    [
        (3, 2, 0, [1, 3, 4]),
        (3, 3, 4, [0, 1, 2, 3, 5, 6, 7, 8]),
        (3, 3, 8, [4, 5, 7]),
        (1, 1, 0, []),
    ],
)
def test_neighbors(width: int, height: int, cell_id: int, expected: List[int]) -> None:
    """Test that the Moore neighborhood is truncated at the edges."""
    assert make_grid(width, height).neighbors(cell_id) == expected


def test_centroids() -> None:
    """Test that centroids lie in the middle of the cells."""
    xs, ys = make_grid().centroids([0, 5])
    assert xs.tolist() == [5.0, 25.0]
    assert ys.tolist() == [5.0, 15.0]


def test_grid_rejects_wrong_mask() -> None:
    """Test that the mask must cover every cell."""
    with raises(DataError):
        GridSpec(10.0, (0, 0), 3, 2, np.ones(5, dtype=bool))


def test_build_grid_from_events() -> None:
    """Test that the grid covers the bounding box of the events."""
    events = [EventRecord(100, 50, date(2016, 1, 1)), EventRecord(530, 250, PERIOD[1])]
    grid = build_grid(events, cell_size=200)
    assert grid.origin == (100.0, 50.0)
    assert (grid.width_cells, grid.height_cells) == (3, 1)
    assert grid.n_eligible == 3


def test_build_grid_with_bounds_and_eligibility() -> None:
    """Test explicit bounds with an eligibility table."""
    eligibility = pd.DataFrame({"cell_id": [0, 1, 2, 3], "eligible": [1, 0, 1, 1]})
    grid = build_grid([], cell_size=10, eligibility=eligibility, bounds=((0, 0), 2, 2))
    assert grid.eligible_cells.tolist() == [0, 2, 3]


def test_build_grid_without_extent() -> None:
    """Test that an empty grid without bounds cannot be built."""
    with raises(CannotInferExtentError):
        build_grid([], cell_size=10)


def test_eligibility_outside_grid() -> None:
    """Test that eligibility rows must refer to cells of the grid."""
    eligibility = pd.DataFrame({"cell_id": [0, 7], "eligible": [1, 1]})
    with raises(DataError):
        build_grid([], cell_size=10, eligibility=eligibility, bounds=((0, 0), 2, 2))


def test_build_frame_labels() -> None:
    """Test that a row is positive iff its cell had an event that day."""
    frame = small_frame()
    assert frame.table["cell_id"].tolist() == [0, 1, 0, 1, 0, 1]
    assert frame.table["day"].tolist() == [0, 0, 1, 1, 2, 2]
    assert frame.table["label"].tolist() == [1, 0, 1, 1, 0, 0]
    assert frame.counts.values.tolist() == [[0, 0, 1], [0, 1, 2], [1, 1, 1]]
    assert frame.n_buckets == 3


def test_build_frame_weekly() -> None:
    """Test that weekly buckets group seven days."""
    events = [EventRecord(5, 5, date(2016, 1, 9))]
    frame = build_frame(
        make_grid(1, 1), events, (date(2016, 1, 1), date(2016, 1, 14)), WEEKLY
    )
    assert frame.table["label"].tolist() == [0, 1]
    assert frame.bucket_date(1) == date(2016, 1, 8)
    assert frame.bucket_of(date(2016, 1, 14)) == 1


def test_build_frame_rejects_invalid_events() -> None:
    """Test that events outside the grid are dropped or raise, as configured."""
    events = [EventRecord(5, 5, PERIOD[0]), EventRecord(500, 500, PERIOD[0])]
    frame = build_frame(make_grid(1, 1), events, PERIOD)
    assert frame.table["label"].tolist() == [1, 0, 0]
    with raises(DataError):
        build_frame(make_grid(1, 1), events, PERIOD, on_invalid=ERROR)


def test_build_frame_ineligible_cell() -> None:
    """Test that events in ineligible cells do not create rows."""
    grid = GridSpec(10.0, (0, 0), 2, 1, np.array([True, False]))
    frame = build_frame(grid, [EventRecord(15, 5, PERIOD[0])], PERIOD)
    assert frame.table["cell_id"].unique().tolist() == [0]
    assert frame.table["label"].sum() == 0


def test_build_frame_event_outside_period() -> None:
    """Test that events outside the study period are an error."""
    with raises(DataError):
        build_frame(make_grid(), [EventRecord(5, 5, date(2016, 2, 1))], PERIOD)


def test_events_frame_interval_start() -> None:
    """Test that interval reports use the start of the interval."""
    raw = pd.DataFrame({"x": [1.0], "y": [2.0], "date_from": ["2016-01-02 13:45"]})
    frame = events_frame(raw)
    assert frame["date"].iloc[0] == pd.Timestamp("2016-01-02")


@mark.parametrize(
    "value,expected",
    [("2/3", Fraction(2, 3)), (0.5, Fraction(1, 2)), ("0.75", Fraction(3, 4))],
)
def test_parse_fraction(value: str, expected: Fraction) -> None:
    """Test that split fractions are parsed exactly."""
    assert parse_fraction(value) == expected


@mark.parametrize(
    "fraction,expected_days",
    [("2/3", ([0, 1], [2])), ("1/3", ([0], [1, 2])), (0.5, ([0], [1, 2]))],
)
def test_chronological_split(
    fraction: str, expected_days: Tuple[List[int], List[int]]
) -> None:
    """Test that all training buckets precede all test buckets."""
    split = chronological_split(small_frame(), fraction)
    assert split.train.days.tolist() == expected_days[0]
    assert split.test.days.tolist() == expected_days[1]
    assert split.boundary_day == expected_days[1][0]
    assert split.train.table["day"].max() < split.test.table["day"].min()


def test_chronological_split_random_frames() -> None:
    """Test the split of random frames against the floor of the train fraction."""
    rng = np.random.default_rng(8)
    for _ in range(100):
        width = int(rng.integers(1, 5))
        n_days = int(rng.integers(2, 40))
        events = [
            EventRecord(
                float(rng.uniform(0, 10 * width)),
                float(rng.uniform(0, 10)),
                date(2016, 1, 1) + timedelta(days=int(rng.integers(0, n_days))),
            )
            for _ in range(int(rng.integers(0, 30)))
        ]
        period = (date(2016, 1, 1), date(2016, 1, 1) + timedelta(days=n_days - 1))
        frame = build_frame(make_grid(width=width, height=1), events, period)
        denominator = int(rng.integers(2, 11))
        fraction = Fraction(int(rng.integers(1, denominator)), denominator)
        n_train = math.floor(fraction * n_days)
        if n_train < 1:
            with raises(DataError):
                chronological_split(frame, fraction)
            continue

        split = chronological_split(frame, fraction)
        train, test = split.train.table, split.test.table
        assert train["day"].max() < test["day"].min()
        assert split.boundary_day == frame.days[n_train]
        assert split.train.days.size == n_train
        assert set(train.index).isdisjoint(test.index)
        assert set(train.index) | set(test.index) == set(frame.table.index)


@mark.parametrize("fraction", [0, 1, "3/2", "-1/2"])
def test_chronological_split_invalid_fraction(fraction: str) -> None:
    """Test that the fraction must leave both sides of the split."""
    with raises(ConfigError):
        chronological_split(small_frame(), fraction)


def test_chronological_split_single_bucket() -> None:
    """Test that a single bucket cannot be split."""
    frame = build_frame(make_grid(1, 1), [], (PERIOD[0], PERIOD[0]))
    with raises(DataError):
        chronological_split(frame, "1/2")


def test_read_audit_detects_leak() -> None:
    """Test that reading test rows before evaluation is detected."""
    audit = ReadAudit()
    split = chronological_split(small_frame(), "2/3", audit=audit)
    audit.stage = "train"
    split.train.xy()
    audit.assert_no_leak(split.boundary_day)

    split.test.xy()
    assert audit.leaks(split.boundary_day) == [("train", 2, 2)]
    with raises(DataError):
        audit.assert_no_leak(split.boundary_day)


def test_read_audit_allows_evaluation() -> None:
    """Test that the evaluation stage may read test rows."""
    audit = ReadAudit()
    split = chronological_split(small_frame(), "2/3", audit=audit)
    audit.stage = "evaluate"
    split.test.rows_for_day(2)
    audit.assert_no_leak(split.boundary_day)


def test_class_balance() -> None:
    """Test the counts of positive and negative rows."""
    balance = class_balance(small_frame())
    assert (balance.positives, balance.negatives) == (3, 3)
    assert balance.ratio == 0.5


def test_restrict_cells() -> None:
    """Test that a sub-frame keeps only the given cells."""
    frame = restrict_cells(small_frame(), [1])
    assert frame.table["cell_id"].tolist() == [1, 1, 1]
    assert frame.table["label"].tolist() == [0, 1, 0]
    assert frame.table.index.tolist() == [0, 1, 2]
