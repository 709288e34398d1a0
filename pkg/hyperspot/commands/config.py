import argparse
import os
from typing import Any, Dict, Optional, Tuple

from hyperspot.config import FLAG_KEYS, STRATEGIES, ExperimentConfig, MatrixConfig
from hyperspot.dataset import RESOLUTIONS
from hyperspot.evaluation import POOLINGS
from hyperspot.features import FEATURE_SETS
from hyperspot.helpers import ConfigError
from hyperspot.learners import LearnerKind
from hyperspot.runner import HotspotRunner
from hyperspot.strings import translation

i18n = translation()

config: Dict[str, Any] = {}
runner: Optional[HotspotRunner] = None


def add_experiment_arguments(parser: argparse.ArgumentParser) -> None:
    """Add the manifest path and the flags overriding its values."""
    flags = i18n["flags"]
    parser.add_argument("config", help=flags["config"])
    parser.add_argument("--strategy", choices=STRATEGIES, help=flags["strategy"])
    parser.add_argument("--phi", type=int, help=flags["phi"])
    parser.add_argument(
        "--learner", choices=[kind.value for kind in LearnerKind], help=flags["learner"]
    )
    parser.add_argument("--seed", type=int, help=flags["seed"])
    parser.add_argument("--n-jobs", dest="n_jobs", type=int, help=flags["n_jobs"])
    parser.add_argument("--tune", action="store_true", default=None, help=flags["tune"])
    parser.add_argument(
        "--train-fraction", dest="train_fraction", help=flags["train_fraction"]
    )
    parser.add_argument(
        "--feature-set",
        dest="feature_set",
        choices=FEATURE_SETS,
        help=flags["feature_set"],
    )
    parser.add_argument("--resolution", choices=RESOLUTIONS, help=flags["resolution"])
    parser.add_argument("--coverage", type=float, nargs="+", help=flags["coverage"])
    parser.add_argument("--pooling", choices=POOLINGS, help=flags["pooling"])
    parser.add_argument(
        "--strata", action="store_true", default=None, help=flags["strata"]
    )
    parser.add_argument("--output", help=flags["output"])
    parser.add_argument(
        "--geojson", action="store_true", default=None, help=flags["geojson"]
    )
    parser.add_argument(
        "--no-plot",
        dest="plot",
        action="store_false",
        default=None,
        help=flags["no_plot"],
    )


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    """Collect the flags that were given on the command line."""
    return {
        flag: getattr(args, flag)
        for flag in FLAG_KEYS
        if getattr(args, flag, None) is not None
    }


def read_manifest(args: argparse.Namespace) -> Tuple[str, Dict[str, Any]]:
    """Read the manifest named on the command line; get its directory and the flags."""
    global config
    if runner is None:
        raise ConfigError("the config extension is not loaded")
    runner.config_path = args.config
    config = runner.config
    overrides = overrides_from_args(args)
    if "output" in overrides:
        overrides["output"] = os.path.abspath(overrides["output"])
    return os.path.dirname(os.path.abspath(args.config)), overrides


def load_experiment(args: argparse.Namespace) -> ExperimentConfig:
    """Resolve the manifest named on the command line with the flag overrides."""
    base_dir, overrides = read_manifest(args)
    return ExperimentConfig.from_mapping(config, base_dir=base_dir, overrides=overrides)


def load_matrix(args: argparse.Namespace) -> MatrixConfig:
    """Resolve the experiment matrix of the manifest named on the command line."""
    base_dir, overrides = read_manifest(args)
    return MatrixConfig.from_mapping(
        config, base_dir=base_dir, overrides=overrides, n_jobs=args.workers
    )


def setup(hotspot_runner: HotspotRunner) -> None:
    """Set up the config globally.

    This is a hack to be able to share the runner with the other commands.
    This extension needs to be loaded first for it to work correctly!
    """
    global runner
    runner = hotspot_runner


def teardown(hotspot_runner: HotspotRunner) -> None:
    """Reset the global config."""
    global config, runner
    config = {}
    runner = None
