"""Tests for the subcommand registry."""

from src.commands import HANDLERS
from src.core.commands import COMMAND_SPECS, get_command_spec, iter_command_specs


class TestRegistry:
    """Tests for command metadata."""

    def test_every_spec_has_a_handler(self):
        assert {spec.handler_id for spec in COMMAND_SPECS} == set(HANDLERS)

    def test_display_order(self):
        names = [spec.name for spec in iter_command_specs()]
        assert names == [
            "simulate", "fit-em", "fit-grad", "train-gknet", "evaluate", "track-sweep", "kernel-check", "grad-check"
        ]

    def test_lookup_by_alias(self):
        spec = get_command_spec("Tracking")
        assert spec is not None
        assert spec.name == "track-sweep"
        assert spec.alias_display() == " (aliases: tracking)"
        assert get_command_spec("fit-em").alias_display() == ""
        assert get_command_spec("unknown") is None

    def test_dump_trace_commands(self):
        assert {spec.name for spec in COMMAND_SPECS if spec.dump_trace} == {"fit-em", "evaluate"}
