import argparse
from datetime import datetime

from hyperspot.commands.config import add_experiment_arguments, load_experiment
from hyperspot.helpers import get_duration_str
from hyperspot.pipeline import train_experiment
from hyperspot.runner import HotspotRunner
from hyperspot.strings import translation

i18n = translation()


def train(args: argparse.Namespace) -> int:
    """Train the predictor of an experiment and write it to the run directory."""
    start = datetime.now()
    config = load_experiment(args)
    result = train_experiment(config)
    for stratum, trained in result.runs.items():
        spec = trained.predictor.spec
        print(
            i18n["train"]["done"].format(
                name=f"{config.name}/{stratum}" if stratum else config.name,
                learner="none" if spec is None else spec.describe(),
                rows=len(trained.split.train),
            )
        )
    print(
        i18n["run"]["written"].format(
            directory=result.run_dir, duration=get_duration_str(start)
        )
    )
    return 0


def setup(runner: HotspotRunner) -> None:
    """Set up the train command."""
    parser = runner.add_command("train", i18n["train"]["help"], train)
    add_experiment_arguments(parser)


def teardown(runner: HotspotRunner) -> None:
    """Unload the train command."""
    runner.remove_command("train")
