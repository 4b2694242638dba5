"""Tests for the CLI and its subcommand handlers."""
