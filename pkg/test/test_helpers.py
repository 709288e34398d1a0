from datetime import date, timedelta
from typing import List

from pytest import mark, raises

from hyperspot.helpers import (
    ArityError,
    ConfigError,
    DataError,
    DayParseError,
    MissingCellsError,
    NumericError,
    StageError,
    get_timedelta_str,
    join_items_with_and,
    try_parse_day,
)


@mark.parametrize(
    "duration,expected",
    [
        (timedelta(days=1, hours=12), "1.5 days"),
        (timedelta(hours=2), "2.0 hours"),
        (timedelta(minutes=3), "3.0 mins"),
        (timedelta(seconds=30), "30.0 secs"),
        (timedelta(seconds=5), "5000 ms"),
        (timedelta(milliseconds=250), "250 ms"),
    ],
)
def test_get_timedelta_str(duration: timedelta, expected: str) -> None:
    """Test that durations are formatted in their largest unit."""
    assert get_timedelta_str(duration) == expected


@mark.parametrize(
    "items,expected",
    [
        ([], ""),
        (["one"], "one"),
        (["one", "two"], "one and two"),
        (["one", "two", "three"], "one, two and three"),
        (["one", "two", "three", "four"], "one, two, three and four"),
    ],
)
def test_join_items_with_and(items: List[str], expected: str) -> None:
    """Test that the items are joined together correctly."""
    actual = join_items_with_and(items)
    assert actual == expected


@mark.parametrize(
    "day_str,expected",
    [
        ("2016-05-03", date(2016, 5, 3)),
        ("2016-05-03T10:00:00", date(2016, 5, 3)),
        ("May 3 2016", date(2016, 5, 3)),
    ],
)
def test_parse_absolute_day(day_str: str, expected: date) -> None:
    """Test that absolute days are parsed correctly."""
    assert try_parse_day(day_str) == expected


@mark.parametrize(
    "day_str,expected",
    [
        ("+3 days", date(2016, 1, 4)),
        ("-2w", date(2015, 12, 18)),
        ("-2 weeks", date(2015, 12, 18)),
        ("+5", date(2016, 1, 6)),
    ],
)
def test_parse_relative_day(day_str: str, expected: date) -> None:
    """Test that offsets are taken relative to the reference day."""
    assert try_parse_day(day_str, reference=date(2016, 1, 1)) == expected


@mark.parametrize("day_str", ["not a day", "2016-13-45"])
def test_parse_invalid_day(day_str: str) -> None:
    """Test that invalid days raise a configuration error."""
    with raises(DayParseError) as error:
        try_parse_day(day_str)
    assert error.value.day_str == day_str
    assert error.value.exit_code == 1


def test_parse_relative_day_without_reference() -> None:
    """Test that an offset without a reference day is rejected."""
    with raises(DayParseError):
        try_parse_day("+3 days")


def test_exit_codes() -> None:
    """Test the exit codes of the error kinds."""
    assert ConfigError("x").exit_code == 1
    assert DataError("x").exit_code == 2
    assert NumericError("x").exit_code == 3
    assert ArityError(3, 2).exit_code == 2


@mark.parametrize(
    "cause,expected",
    [
        (ConfigError("bad flag"), 1),
        (DataError("bad rows"), 2),
        (NumericError("diverged"), 3),
        (FloatingPointError("overflow"), 3),
        (ZeroDivisionError("division by zero"), 3),
        (KeyError("column"), 2),
    ],
)
def test_stage_error_exit_code(cause: Exception, expected: int) -> None:
    """Test that a stage failure keeps the exit code of its cause."""
    error = StageError("train", cause)
    assert error.exit_code == expected
    assert error.stage == "train"
    assert str(error).startswith("[train] ")


def test_missing_cells_message() -> None:
    """Test that long lists of missing cells are shortened."""
    error = MissingCellsError("the weather table", list(range(12)), limit=3)
    assert str(error) == "the weather table is missing cells 0, 1, 2 and 9 more"
    assert error.cell_ids == list(range(12))
