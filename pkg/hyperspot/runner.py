import argparse
import importlib
import sys
from collections import defaultdict
from types import ModuleType
from typing import Any, Callable, Dict, List, Optional

import toml

from hyperspot import logger
from hyperspot.helpers import ConfigError
from hyperspot.strings import translation

i18n = translation()

Handler = Callable[[argparse.Namespace], Optional[int]]
ErrorHandler = Callable[[BaseException, logger.RunContext], int]


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str) -> None:
        """Show the usage and report invalid arguments as a configuration error."""
        self.print_usage(sys.stderr)
        raise ConfigError(message)


class HotspotRunner:
    def __init__(self, prog: str = "hyperspot", **kwargs: Any) -> None:
        """
        Initialize the HotspotRunner.

        One can provide:
        - config_path (default: experiment.toml): The path to the experiment manifest
        - command_path (default: hyperspot.commands.): The path to the command modules
        - extensions (default: list): list of extensions to load
        """
        self.parser = ArgumentParser(
            prog=prog, description=i18n["runner"]["description"]
        )
        self.parser.add_argument(
            "-v", "--verbose", action="store_true", help=i18n["runner"]["verbose"]
        )
        self.subparsers = self.parser.add_subparsers(dest="command", metavar="COMMAND")
        self.config_path = kwargs.get("config_path", "experiment.toml")
        self.command_path = kwargs.get("command_path", "hyperspot.commands.")
        self.extensions: Dict[str, ModuleType] = {}
        self.error_handlers: List[ErrorHandler] = []

        for extension in kwargs.get("extensions", list()):
            logger.debug(f"Loading extension {extension}...")
            self.load(extension)

    @property
    def config(self) -> Dict[str, Any]:
        """Provide the configuration loaded from the specified file."""
        try:
            return defaultdict(dict, toml.load(self.config_path))
        except (OSError, toml.TomlDecodeError) as error:
            raise ConfigError(
                f"cannot read the configuration {self.config_path}: {error}"
            )

    @property
    def commands(self) -> List[str]:
        """The names of the registered commands."""
        return list(self.subparsers.choices.keys())

    def load(self, name: str) -> None:
        """Load the extension with the specified name."""
        if not name:
            return
        if name in self.extensions:
            raise ConfigError(f"the extension '{name}' is already loaded")
        module = importlib.import_module(f"{self.command_path}{name}")
        module.setup(self)
        self.extensions[name] = module

    def reload(self, name: str) -> None:
        """Reload the extension with the specified name."""
        if not name:
            return
        self.unload(name)
        module = importlib.reload(importlib.import_module(f"{self.command_path}{name}"))
        module.setup(self)
        self.extensions[name] = module

    def unload(self, name: str) -> None:
        """Unload the extension with the specified name."""
        if name and name in self.extensions:
            self.extensions.pop(name).teardown(self)

    def add_command(
        self, name: str, help_text: str, handler: Handler
    ) -> argparse.ArgumentParser:
        """Register a sub-command and get its parser to add the arguments to."""
        parser = self.subparsers.add_parser(name, help=help_text, description=help_text)
        parser.set_defaults(handler=handler)
        return parser

    def remove_command(self, name: str) -> None:
        """Remove a sub-command."""
        self.subparsers.choices.pop(name, None)

    def add_error_handler(self, handler: ErrorHandler) -> None:
        """Register a handler turning a failed command into an exit code."""
        self.error_handlers.append(handler)

    def remove_error_handler(self, handler: ErrorHandler) -> None:
        """Remove an error handler."""
        if handler in self.error_handlers:
            self.error_handlers.remove(handler)

    def run(self, argv: Optional[List[str]] = None) -> int:
        """Run the command given on the command line and get its exit code."""
        ctx = logger.RunContext(experiment="hyperspot")
        try:
            args = self.parser.parse_args(argv)
            logger.configure_logging(args.verbose)
            if args.command is None:
                self.parser.print_help()
                return ConfigError.exit_code
            ctx = logger.RunContext(experiment=args.command)
            logger.debug(f"Command invoked: {args.command}", ctx)
            exit_code = args.handler(args) or 0
            logger.debug("Command completed", ctx)
            return exit_code
        except Exception as error:
            if not self.error_handlers:
                raise
            return self.error_handlers[-1](error, ctx)
