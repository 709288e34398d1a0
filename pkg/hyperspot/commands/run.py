import argparse
from datetime import datetime

from hyperspot.commands.config import add_experiment_arguments, load_experiment
from hyperspot.commands.evaluate import print_reports
from hyperspot.helpers import get_duration_str
from hyperspot.pipeline import run_experiment
from hyperspot.runner import HotspotRunner
from hyperspot.strings import translation

i18n = translation()


def run(args: argparse.Namespace) -> int:
    """Run every stage of an experiment."""
    start = datetime.now()
    config = load_experiment(args)
    result = run_experiment(config)
    print_reports(config, result.reports)
    print(
        i18n["run"]["written"].format(
            directory=result.run_dir, duration=get_duration_str(start)
        )
    )
    return 0


def setup(runner: HotspotRunner) -> None:
    """Set up the run command."""
    parser = runner.add_command("run", i18n["run"]["help"], run)
    add_experiment_arguments(parser)


def teardown(runner: HotspotRunner) -> None:
    """Unload the run command."""
    runner.remove_command("run")
