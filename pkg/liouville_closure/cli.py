"""Command-line entry point."""

from __future__ import annotations

import argparse
import logging
import pathlib
import sys

from . import __version__
from .config import parse_config
from .const import DOMAIN, EXIT_INVALID
from .coordinator import SUBCOMMANDS, ClosureCoordinator
from .exceptions import ConfigValidationError

_LOGGER = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the validation code."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=DOMAIN, description="Path-integral closure experiments driven by a configuration file.")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("config", type=pathlib.Path, help="configuration file ([section] / key = value)")
    parser.add_argument("--out", type=str, default=None, help="output directory (overrides [run] output)")
    parser.add_argument("--seed", type=int, default=None, help="random seed (overrides [run] seed)")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return parser


# ---------------------------
#   main
# ---------------------------
def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        text = args.config.read_text(encoding="utf-8")
    except OSError as err:
        _LOGGER.error("cannot read %s: %s", args.config, err)
        return EXIT_INVALID
    try:
        config = parse_config(text).override(output=args.out, seed=args.seed)
    except ConfigValidationError as err:
        for line, message in err.errors:
            _LOGGER.error("%s:%d: %s", args.config, line, message)
        return EXIT_INVALID

    return ClosureCoordinator(config).run(args.subcommand)


if __name__ == "__main__":
    sys.exit(main())
