import re
from datetime import date, datetime, timedelta
from typing import List, Optional, Sequence

from dateutil import parser

# First an amount and then a unit, e.g. "+3 days" or "-2w"
relative_day_regex = re.compile(
    r"^(?P<sign>[+-])\s*(?P<amount>\d+)\s*(?P<unit>[dw]?)\w*$"
)


class HotspotError(RuntimeError):
    """Base exception of the forecasting pipeline.

    Every subclass carries the exit code the command line returns for it.
    """

    exit_code = 1

    def __init__(self, message: str) -> None:
        """Create a new pipeline exception."""
        super().__init__(message)
        self.message = message


class ConfigError(HotspotError):
    """Exception raised when the experiment configuration is invalid."""

    exit_code = 1


class DataError(HotspotError):
    """Exception raised when input data violates a precondition."""

    exit_code = 2


class NumericError(HotspotError):
    """Exception raised when a numeric procedure fails."""

    exit_code = 3


class CannotInferExtentError(DataError):
    """Exception raised when a grid has neither events nor explicit bounds."""

    def __init__(self) -> None:
        """Create a new extent exception."""
        super().__init__("cannot infer extent")


class CannotBalanceError(DataError):
    """Exception raised when a resampler receives a single-class input."""

    def __init__(self, method: str) -> None:
        """Create a new balancing exception."""
        super().__init__(f"cannot balance: {method} needs both classes")
        self.method = method


class MissingCellsError(DataError):
    """Exception raised when a per-cell table misses eligible cells."""

    def __init__(self, what: str, cell_ids: Sequence[int], limit: int = 10) -> None:
        """Create a new missing cells exception."""
        shown = [str(cell) for cell in cell_ids[:limit]]
        if len(cell_ids) > limit:
            shown.append(f"{len(cell_ids) - limit} more")
        super().__init__(f"{what} is missing cells {join_items_with_and(shown)}")
        self.cell_ids = list(cell_ids)


class ArityError(DataError):
    """Exception raised when a feature matrix has the wrong number of columns."""

    def __init__(self, expected: int, actual: int) -> None:
        """Create a new arity exception."""
        super().__init__(f"expected {expected} features, got {actual}")
        self.expected = expected
        self.actual = actual


class DayParseError(ConfigError):
    """Exception raised when a day string is invalid."""

    def __init__(self, day_str: str) -> None:
        """Create a new DayParseError exception."""
        super().__init__(f"Invalid day string: '{day_str}'")
        self.day_str = day_str


class StageError(HotspotError):
    """Exception wrapping a failure inside a named pipeline stage."""

    def __init__(self, stage: str, cause: BaseException) -> None:
        """Create a new stage exception."""
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
        if isinstance(cause, HotspotError):
            self.exit_code = cause.exit_code
        elif isinstance(cause, (ArithmeticError, FloatingPointError)):
            self.exit_code = NumericError.exit_code
        else:
            self.exit_code = DataError.exit_code


def get_duration_str(start: datetime) -> str:
    """Get the processing duration based on the start time."""
    duration = datetime.now(tz=start.tzinfo) - start
    return get_timedelta_str(duration)


def get_timedelta_str(duration: timedelta) -> str:
    """Format the given timedelta."""
    if duration.days >= 1:
        duration_days = duration.days + duration.seconds / 86400
        return f"{duration_days:.1f} days"
    if duration.seconds >= 3600:
        duration_hours = duration.seconds / 3600
        return f"{duration_hours:.1f} hours"
    if duration.seconds >= 60:
        duration_mins = duration.seconds / 60
        return f"{duration_mins:.1f} mins"
    if duration.seconds > 5:
        duration_secs = duration.seconds + duration.microseconds / 1000000
        return f"{duration_secs:.1f} secs"

    duration_ms = duration.seconds * 1000 + duration.microseconds / 1000
    return f"{duration_ms:0.0f} ms"


def join_items_with_and(items: List[str]) -> str:
    """Join the list with commas and "and"."""
    if len(items) <= 2:
        return " and ".join(items)
    return "{} and {}".format(", ".join(items[:-1]), items[-1])


def try_parse_day(day_str: str, reference: Optional[date] = None) -> date:
    """Try to parse the given day string.

    Handles absolute days like '2017-03-05' and offsets like '+3 days' or '-2w',
    which are taken relative to the reference day.
    If the string cannot be parsed, a DayParseError is raised.
    """
    rel_match = relative_day_regex.match(day_str.strip())
    if rel_match is not None:
        if reference is None:
            raise DayParseError(day_str)
        amount = int(rel_match.group("amount"))
        if rel_match.group("unit") == "w":
            amount *= 7
        if rel_match.group("sign") == "-":
            amount = -amount
        return reference + timedelta(days=amount)

    try:
        return parser.isoparse(day_str).date()
    except ValueError:
        try:
            return parser.parse(day_str).date()
        except (ValueError, OverflowError):
            raise DayParseError(day_str)
