import argparse
import os

import pandas as pd

from hyperspot.evaluation import SurveillanceCurve, plot_surveillance
from hyperspot.helpers import DataError
from hyperspot.pipeline import compare, write_csv
from hyperspot.runner import HotspotRunner
from hyperspot.strings import translation

i18n = translation()


def read_curve(run_dir: str) -> SurveillanceCurve:
    """Read the surveillance curve written by a run."""
    path = os.path.join(run_dir, "surveillance.csv")
    try:
        table = pd.read_csv(path)
    except (OSError, pd.errors.ParserError) as error:
        raise DataError(f"cannot read {path}: {error}")
    return SurveillanceCurve(
        coverage=table["coverage"].to_numpy(dtype=float),
        hit_rate=table["hit_rate"].to_numpy(dtype=float),
    )


def compare_runs(args: argparse.Namespace) -> int:
    """Test whether the first run has higher daily hit rates than the second."""
    table = compare(args.run_a, args.run_b)
    path = args.output or os.path.join(args.run_a, "comparison.csv")
    write_csv(table, path)
    if args.plot:
        curves = {
            os.path.basename(os.path.normpath(run)): read_curve(run)
            for run in (args.run_a, args.run_b)
        }
        plot_surveillance(curves, args.plot)

    print(i18n["compare"]["title"].format(run_a=args.run_a, run_b=args.run_b))
    print(table.to_string(index=False))
    return 0


def setup(runner: HotspotRunner) -> None:
    """Set up the compare command."""
    texts = i18n["compare"]
    parser = runner.add_command("compare", texts["help"], compare_runs)
    parser.add_argument("run_a", help=texts["run_a"])
    parser.add_argument("run_b", help=texts["run_b"])
    parser.add_argument("--output", help=texts["output"])
    parser.add_argument("--plot", help=texts["plot"])


def teardown(runner: HotspotRunner) -> None:
    """Unload the compare command."""
    runner.remove_command("compare")
