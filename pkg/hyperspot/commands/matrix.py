import argparse
from datetime import datetime

from hyperspot.commands.config import add_experiment_arguments, load_matrix
from hyperspot.helpers import get_duration_str
from hyperspot.pipeline import run_matrix
from hyperspot.runner import HotspotRunner
from hyperspot.strings import translation

i18n = translation()


def matrix(args: argparse.Namespace) -> int:
    """Run every experiment of the manifest's matrix and compare them."""
    start = datetime.now()
    config = load_matrix(args)
    result = run_matrix(config)
    texts = i18n["matrix"]
    print(texts["title"].format(experiments=len(config.experiments)))
    print(result.summary.to_string(index=False))
    if len(result.comparison):
        print(texts["comparison"].format(baseline=config.baseline))
        print(result.comparison.to_string(index=False))
    print(
        i18n["run"]["written"].format(
            directory=result.output, duration=get_duration_str(start)
        )
    )
    return 0


def setup(runner: HotspotRunner) -> None:
    """Set up the matrix command."""
    parser = runner.add_command("matrix", i18n["matrix"]["help"], matrix)
    add_experiment_arguments(parser)
    parser.add_argument("--workers", type=int, help=i18n["matrix"]["workers"])


def teardown(runner: HotspotRunner) -> None:
    """Unload the matrix command."""
    runner.remove_command("matrix")
