import logging
from dataclasses import dataclass, replace
from typing import Dict, Optional

_logger = logging.getLogger("Hyperspot Logger")


@dataclass(frozen=True)
class RunContext:
    """The experiment and pipeline stage a log message belongs to."""

    experiment: str
    stage: str = ""

    def at(self, stage: str) -> "RunContext":
        """Get the same context for another stage."""
        return replace(self, stage=stage)


def configure_logging(verbose: bool = False) -> None:
    """
    Set the configuration for logging.

    Note that a custom set of methods is provided, where the RunContext is provided.
    This is used to retrieve the experiment and stage for the logging message. This
    file should be used instead of the "logging" module.
    """
    level = logging.DEBUG if verbose else logging.INFO
    formatter = logging.Formatter(
        "%(asctime)-15s | %(levelname)7s | %(experiment)16s | %(stage)8s | %(message)s"
    )

    if not _logger.handlers:
        console_handler = logging.StreamHandler()
        console_handler.setFormatter(formatter)
        _logger.addHandler(console_handler)
    for handler in _logger.handlers:
        handler.setLevel(level)
    _logger.setLevel(level)
    _logger.propagate = False

    logging.getLogger().setLevel(level)
    logging.basicConfig(format="%(asctime)-15s | %(levelname)7s | %(message)s")


def critical(message: str, ctx: Optional[RunContext] = None) -> None:
    """Log a critical message using the provided RunContext."""
    _logger.critical(message, extra=_retrieve_logging_fields(ctx))


def error(message: str, ctx: Optional[RunContext] = None) -> None:
    """Log an error message using the provided RunContext."""
    _logger.error(message, extra=_retrieve_logging_fields(ctx))


def warning(message: str, ctx: Optional[RunContext] = None) -> None:
    """Log a warning message using the provided RunContext."""
    _logger.warning(message, extra=_retrieve_logging_fields(ctx))


def info(message: str, ctx: Optional[RunContext] = None) -> None:
    """Log an information message using the provided RunContext."""
    _logger.info(message, extra=_retrieve_logging_fields(ctx))


def debug(message: str, ctx: Optional[RunContext] = None) -> None:
    """Log a debug message using the provided RunContext."""
    _logger.debug(message, extra=_retrieve_logging_fields(ctx))


def _retrieve_logging_fields(ctx: Optional[RunContext] = None) -> Dict:
    if ctx is None:
        return {"experiment": "", "stage": ""}
    return {
        "experiment": ctx.experiment,
        "stage": ctx.stage,
    }
