import argparse
from datetime import datetime

from hyperspot import logger
from hyperspot.helpers import get_duration_str
from hyperspot.runner import HotspotRunner
from hyperspot.strings import translation
from hyperspot.synthgen import SynthConfig, generate, write_dataset

i18n = translation()

# Command-line flags with the generator setting they override and its type
SYNTH_FLAGS = {
    "width": ("width_cells", int),
    "height": ("height_cells", int),
    "days": ("days", int),
    "cell_size": ("cell_size", float),
    "target_fraction": ("target_fraction", float),
    "seed": ("seed", int),
}


def synth(args: argparse.Namespace) -> int:
    """Generate a synthetic city with a matching experiment manifest."""
    start = datetime.now()
    ctx = logger.RunContext(experiment="synth")
    settings = {
        name: getattr(args, flag)
        for flag, (name, _) in SYNTH_FLAGS.items()
        if getattr(args, flag) is not None
    }
    config = SynthConfig(**settings)
    logger.info(
        f"Simulating {config.days} days on a "
        f"{config.width_cells}x{config.height_cells} grid with seed {config.seed}.",
        ctx,
    )
    dataset = generate(config)
    paths = write_dataset(dataset, args.directory)
    logger.debug(f"Wrote {', '.join(paths)}.", ctx)
    print(
        i18n["synth"]["done"].format(
            events=len(dataset.events),
            fraction=dataset.positive_fraction,
            directory=args.directory,
            duration=get_duration_str(start),
        )
    )
    return 0


def setup(runner: HotspotRunner) -> None:
    """Set up the synth command."""
    texts = i18n["synth"]
    parser = runner.add_command("synth", texts["help"], synth)
    parser.add_argument("directory", help=texts["directory"])
    for flag, (_, value_type) in SYNTH_FLAGS.items():
        parser.add_argument(
            f"--{flag.replace('_', '-')}", dest=flag, type=value_type, help=texts[flag]
        )


def teardown(runner: HotspotRunner) -> None:
    """Unload the synth command."""
    runner.remove_command("synth")
