"""Subcommand metadata shared by the CLI parser and its help output."""

from .registry import COMMAND_LOOKUP, COMMAND_SPECS, CommandSpec, get_command_spec, iter_command_specs

__all__ = ["COMMAND_LOOKUP", "COMMAND_SPECS", "CommandSpec", "get_command_spec", "iter_command_specs"]
