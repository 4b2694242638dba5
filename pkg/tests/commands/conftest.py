"""Shared fixtures for CLI and command handler tests."""

from __future__ import annotations

import json

import pytest
import yaml

from src.main import cli


@pytest.fixture
def tiny_config(tmp_path):
    """A small run config: ER(6, 0.5) graph, two short SSM trajectories, three EM iterations."""
    config = {
        "seed": 3,
        "out": str(tmp_path / "run"),
        "graph": {"n": 6, "p": 0.5},
        "model": {"c": 0.2, "alpha": 0.3, "h": [1.0, 0.3], "sigma2": 0.05, "observed": [0, 1, 2, 4]},
        "simulate": {"steps": 30, "trajectories": 2},
        "em": {"max_iters": 3},
        "grad": {"max_iters": 3},
    }
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(config), encoding="utf-8")
    return path


@pytest.fixture
def run_cli(capsys):
    """Invoke the CLI and return (exit code, JSON stdout lines, JSON stderr lines)."""

    def _run(*argv: str):
        print(f"\n INPUT: graph-kalman {' '.join(argv)}")
        code = cli(list(argv))
        captured = capsys.readouterr()
        out = [json.loads(line) for line in captured.out.splitlines() if line.startswith("{")]
        err = [json.loads(line) for line in captured.err.splitlines() if line.startswith("{")]
        print(f" OUTPUT: exit={code} stdout={out} stderr={err}")
        return code, out, err

    return _run
