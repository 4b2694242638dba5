"""CLI entry point."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Sequence

from dotenv import load_dotenv

from .core.commands import get_command_spec, iter_command_specs
from .core.errors import ConfigError, DataError, GraphKalmanError, NumericalError

LOGGER = logging.getLogger(__name__)

EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graph-kalman",
        description="Graph Kalman filtering: simulation, likelihood fitting and GKNet experiments",
    )
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    for spec in iter_command_specs():
        sub = subparsers.add_parser(
            spec.name,
            aliases=list(spec.aliases),
            help=spec.description,
            description=f"{spec.description}\n\nusage: {spec.usage}",
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        sub.set_defaults(handler_id=spec.handler_id)
        sub.add_argument("--config", help="YAML or JSON run configuration")
        sub.add_argument("--seed", type=int, help="Root seed (overrides the config file)")
        sub.add_argument("--out", help="Output directory")
        sub.add_argument("--threads", type=int, help="Worker threads for experiment cells")
        sub.add_argument("--preset", choices=("desk", "full"), help="Tracking-sweep size preset")
        sub.add_argument(
            "--set",
            action="append",
            metavar="KEY=VALUE",
            help="Override a config key by dotted path, e.g. --set gknet.lam=0.1 (repeatable)",
        )
        sub.add_argument("--verbosity", choices=LOG_LEVELS, type=str.upper, help="Log level")
        if spec.dump_trace:
            sub.add_argument("--dump-trace", action="store_true", help="Write per-step filter/smoother values as CSV")
    return parser


def _configure_logging(verbosity: str | None) -> None:
    load_dotenv()
    level_name = (verbosity or os.getenv("LOG_LEVEL", "INFO")).upper()
    logging.basicConfig(
        level=getattr(logging, level_name, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _fail(code: int, exc: BaseException, command: str) -> int:
    print(json.dumps({"error": type(exc).__name__, "message": str(exc), "command": command}), file=sys.stderr)
    return code


def cli(argv: Sequence[str] | None = None) -> int:
    """Command-line entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "handler_id", None):
        parser.print_help()
        return EXIT_FAILURE

    _configure_logging(args.verbosity)
    command = get_command_spec(args.command).name
    LOGGER.info("Running %s", command)
    # Import here so `--help` does not pay for numpy/scipy.
    from .commands import HANDLERS

    try:
        return HANDLERS[args.handler_id](args)
    except ConfigError as exc:
        LOGGER.error("Configuration error: %s", exc)
        return _fail(EXIT_CONFIG, exc, command)
    except DataError as exc:
        LOGGER.error("Data error: %s", exc)
        return _fail(EXIT_DATA, exc, command)
    except NumericalError as exc:
        LOGGER.error("Numerical error: %s", exc)
        return _fail(EXIT_NUMERICAL, exc, command)
    except ValueError as exc:
        LOGGER.error("Invalid value: %s", exc)
        return _fail(EXIT_CONFIG, exc, command)
    except (GraphKalmanError, OSError) as exc:
        LOGGER.error("%s", exc)
        return _fail(EXIT_FAILURE, exc, command)
    except KeyboardInterrupt:
        LOGGER.info("Interrupted by user")
        return 130


if __name__ == "__main__":
    raise SystemExit(cli())
