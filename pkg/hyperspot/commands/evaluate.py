import argparse
from datetime import datetime
from typing import Dict

from hyperspot.commands.config import add_experiment_arguments, load_experiment
from hyperspot.config import ExperimentConfig
from hyperspot.evaluation import MetricReport
from hyperspot.helpers import get_duration_str
from hyperspot.pipeline import evaluate_experiment
from hyperspot.runner import HotspotRunner
from hyperspot.strings import translation

i18n = translation()


def print_reports(config: ExperimentConfig, reports: Dict[str, MetricReport]) -> None:
    """Print the hit rate, PAI and AUC of every stratum."""
    for stratum, report in reports.items():
        print(i18n["evaluate"]["title"].format(name=stratum or config.name))
        for level in report.levels:
            print(
                i18n["evaluate"]["level"].format(
                    coverage=level,
                    hit_rate=report.hit_rates[level],
                    pai=report.pai[level],
                )
            )
        print(i18n["evaluate"]["auc"].format(auc=report.auc))


def evaluate(args: argparse.Namespace) -> int:
    """Evaluate a trained predictor on the test period."""
    start = datetime.now()
    config = load_experiment(args)
    result = evaluate_experiment(config)
    print_reports(config, result.reports)
    print(
        i18n["run"]["written"].format(
            directory=result.run_dir, duration=get_duration_str(start)
        )
    )
    return 0


def setup(runner: HotspotRunner) -> None:
    """Set up the evaluate command."""
    parser = runner.add_command("evaluate", i18n["evaluate"]["help"], evaluate)
    add_experiment_arguments(parser)


def teardown(runner: HotspotRunner) -> None:
    """Unload the evaluate command."""
    runner.remove_command("evaluate")
