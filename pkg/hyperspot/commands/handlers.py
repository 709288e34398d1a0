import sys
import traceback
import uuid
from typing import Optional

from hyperspot import logger
from hyperspot.helpers import (
    ArityError,
    CannotBalanceError,
    CannotInferExtentError,
    ConfigError,
    DataError,
    DayParseError,
    HotspotError,
    MissingCellsError,
    NumericError,
    StageError,
)
from hyperspot.runner import HotspotRunner
from hyperspot.strings import translation

i18n = translation()


def report(message: str, stage: Optional[str] = None) -> None:
    """Show a message to the user, tagged with the stage that failed."""
    if stage:
        message = f"[{stage}] {message}"
    print(message.rstrip("\n"), file=sys.stderr)


def handle_error(error: BaseException, ctx: logger.RunContext) -> int:
    """Log that a command has failed, give the user feedback and get the exit code."""
    cause = error
    stage = None
    if isinstance(error, StageError):
        cause = error.cause
        stage = error.stage
        ctx = ctx.at(stage)

    if isinstance(cause, DayParseError):
        logger.warning(f"Invalid day string '{cause.day_str}'.", ctx)
        report(i18n["handlers"]["invalid_day"].format(day_str=cause.day_str), stage)
    elif isinstance(cause, CannotInferExtentError):
        logger.warning("The grid has neither events nor explicit bounds.", ctx)
        report(i18n["handlers"]["cannot_infer_extent"], stage)
    elif isinstance(cause, CannotBalanceError):
        logger.warning(f"{cause.method} got a single-class input.", ctx)
        report(i18n["handlers"]["cannot_balance"].format(method=cause.method), stage)
    elif isinstance(cause, ArityError):
        logger.warning(f"Expected {cause.expected} features, got {cause.actual}.", ctx)
        message = i18n["handlers"]["arity"]
        report(message.format(expected=cause.expected, actual=cause.actual), stage)
    elif isinstance(cause, MissingCellsError):
        logger.warning(f"{len(cause.cell_ids)} cells are missing: {cause}", ctx)
        report(i18n["handlers"]["missing_cells"].format(message=cause), stage)
    elif isinstance(cause, ConfigError):
        logger.warning(f"Invalid configuration: {cause}", ctx)
        report(i18n["handlers"]["config_error"].format(message=cause), stage)
    elif isinstance(cause, DataError):
        logger.warning(f"Invalid data: {cause}", ctx)
        report(i18n["handlers"]["data_error"].format(message=cause), stage)
    elif isinstance(cause, NumericError):
        logger.error(f"Numeric failure: {cause}", ctx)
        report(i18n["handlers"]["numeric_error"].format(message=cause), stage)
    else:
        tracker_id = uuid.uuid4()
        trace = "".join(
            traceback.format_exception(type(cause), cause, cause.__traceback__)
        )
        logger.error(
            f"[{tracker_id}] {type(cause).__name__}: {str(cause)}\n{trace}", ctx
        )
        report(i18n["handlers"]["unknown_error"].format(tracker_id=tracker_id), stage)

    if isinstance(error, HotspotError):
        return error.exit_code
    if isinstance(error, ArithmeticError):
        return NumericError.exit_code
    return DataError.exit_code


def setup(runner: HotspotRunner) -> None:
    """Set up the error handlers."""
    runner.add_error_handler(handle_error)


def teardown(runner: HotspotRunner) -> None:
    """Unload the error handlers."""
    runner.remove_error_handler(handle_error)
