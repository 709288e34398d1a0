import sys
from typing import List, Optional

from hyperspot.runner import HotspotRunner

EXTENSIONS = [
    # The config extension has to be first!
    "config",
    "handlers",
    "synth",
    "ingest",
    "train",
    "evaluate",
    "run",
    "rank",
    "compare",
    "matrix",
]


def main(argv: Optional[List[str]] = None) -> int:
    """Run the hyperspot command line."""
    runner = HotspotRunner(extensions=EXTENSIONS)
    return runner.run(argv)


if __name__ == "__main__":
    sys.exit(main())
