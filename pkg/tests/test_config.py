"""Tests for run-config loading, overrides, presets and the config echo."""

import json

import pytest
import yaml

from src.core.config import (
    THREADS_ENV,
    RunConfig,
    apply_override,
    config_echo,
    load_run_config,
    parse_override,
    read_config_file,
    write_config_echo,
)
from src.core.errors import ConfigError
from src.core.models import Operator, Task


def write_yaml(path, data):
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return path


class TestOverrides:
    """Tests for --set parsing."""

    @pytest.mark.parametrize(
        "item,expected",
        [
            ("seed=4", (["seed"], 4)),
            ("gknet.hidden=[4, 4]", (["gknet", "hidden"], [4, 4])),
            ("model.h=[1.0, -0.2]", (["model", "h"], [1.0, -0.2])),
            ("graph.file=data/g.txt", (["graph", "file"], "data/g.txt")),
            ("model.observed=", (["model", "observed"], None)),
            ("grad.learn_c=true", (["grad", "learn_c"], True)),
        ],
    )
    def test_yaml_values(self, item, expected):
        print(f"\n INPUT: {item}")
        assert parse_override(item) == expected

    def test_malformed(self):
        with pytest.raises(ConfigError, match="dotted.key=value"):
            parse_override("seed")
        with pytest.raises(ConfigError, match="cannot parse"):
            parse_override("model.h=[1,")

    def test_not_a_section(self):
        raw = {"seed": 1}
        with pytest.raises(ConfigError, match="not a section"):
            apply_override(raw, ["seed", "x"], 2)
        apply_override(raw, ["gknet", "lam"], 0.2)
        assert raw["gknet"] == {"lam": 0.2}


class TestLoadRunConfig:
    """Tests for layering file values, presets, overrides and flags."""

    def test_defaults(self):
        config = load_run_config()
        assert isinstance(config, RunConfig)
        assert config.seed == 0
        assert config.train.seed == 0
        assert config.model.operator is Operator.LAPLACIAN

    def test_layering(self, tmp_path):
        path = write_yaml(tmp_path / "run.yaml", {"seed": 5, "gknet": {"lam": 0.2, "task": "forecasting"}})
        config = load_run_config(path, ["gknet.hidden=[4, 4]", "em.max_iters=7", "seed=3"], seed=9)
        print(f"\n OUTPUT: seed={config.seed} gknet={config.gknet}")
        assert config.seed == 9
        assert config.gknet.task is Task.FORECASTING
        assert config.gknet.hidden == (4, 4)
        assert config.gknet.lam == pytest.approx(0.2)
        assert config.em.max_iters == 7

    def test_seed_and_threads_propagate(self, tmp_path):
        path = write_yaml(tmp_path / "run.yaml", {"seed": 11, "threads": 3, "tracking": {"seed": 99}})
        config = load_run_config(path)
        assert config.train.seed == 11
        assert config.tracking.seed == 11
        assert config.tracking.train.seed == 11
        assert config.task.seed == 11
        assert config.tracking.threads == 3
        assert config.task.threads == 3

    def test_unknown_key_names_path(self, tmp_path):
        path = write_yaml(tmp_path / "run.yaml", {"gknet": {"lamda": 0.1}})
        with pytest.raises(ConfigError, match=r"gknet\.lamda"):
            load_run_config(path)
        with pytest.raises(ConfigError, match="bogus"):
            load_run_config(overrides=["bogus=1"])

    def test_invalid_value_names_section(self):
        with pytest.raises(ConfigError, match="simulate"):
            load_run_config(overrides=["simulate.steps=0"])
        with pytest.raises(ConfigError, match="operator"):
            load_run_config(overrides=["model.operator=adjacency"])

    def test_preset_then_overrides(self):
        config = load_run_config(overrides=["tracking.steps=10"], preset="desk")
        assert config.preset == "desk"
        assert config.tracking.n == 16
        assert config.tracking.trajectories == 200
        assert config.tracking.steps == 10
        with pytest.raises(ConfigError, match="preset"):
            load_run_config(preset="huge")

    def test_threads_from_environment(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "4")
        assert load_run_config().threads == 4
        assert load_run_config(threads=2).threads == 2
        monkeypatch.setenv(THREADS_ENV, "four")
        with pytest.raises(ConfigError, match=THREADS_ENV):
            load_run_config()


class TestConfigFiles:
    """Tests for reading config files and the echo."""

    def test_read_errors(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            read_config_file(tmp_path / "absent.yaml")
        listing = tmp_path / "list.yaml"
        listing.write_text("- 1\n- 2\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="mapping"):
            read_config_file(listing)
        empty = tmp_path / "empty.yaml"
        empty.write_text("", encoding="utf-8")
        assert read_config_file(empty) == {}

    def test_json_file(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"seed": 2, "graph": {"n": 5}}), encoding="utf-8")
        config = load_run_config(path)
        assert config.graph.n == 5

    def test_echo_reproduces_config(self, tmp_path):
        config = load_run_config(
            overrides=["gknet.task=imputation", "model.h=[1.0, 0.5]", "tracking.snrs=[0, 10]"], seed=7
        )
        path = write_config_echo(config, tmp_path)
        assert path.name == "config.echo.json"
        reloaded = load_run_config(path)
        assert config_echo(reloaded) == config_echo(config)
        assert reloaded.tracking.snrs == (0.0, 10.0)
