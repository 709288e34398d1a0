import argparse
import os

from hyperspot import logger
from hyperspot.commands.config import add_experiment_arguments, load_experiment
from hyperspot.dataset import class_balance
from hyperspot.pipeline import prepare_frame, run_directory, write_csv
from hyperspot.runner import HotspotRunner
from hyperspot.strings import translation

i18n = translation()


def ingest(args: argparse.Namespace) -> int:
    """Build the feature frame of an experiment and write it to a CSV file."""
    config = load_experiment(args)
    ctx = logger.RunContext(experiment=config.name)
    frame, _ = prepare_frame(config, ctx)

    path = args.frame or os.path.join(run_directory(config), "frame.csv")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    write_csv(frame.table, path)

    balance = class_balance(frame)
    print(
        i18n["ingest"]["done"].format(
            rows=len(frame),
            features=len(frame.feature_names),
            positives=balance.positives,
            ratio=balance.ratio,
            path=path,
        )
    )
    return 0


def setup(runner: HotspotRunner) -> None:
    """Set up the ingest command."""
    parser = runner.add_command("ingest", i18n["ingest"]["help"], ingest)
    add_experiment_arguments(parser)
    parser.add_argument("--frame", help=i18n["ingest"]["frame"])


def teardown(runner: HotspotRunner) -> None:
    """Unload the ingest command."""
    runner.remove_command("ingest")
