"""Tests for the CLI parser, exit codes and end-to-end command runs."""

import json

import pandas as pd
import pytest

from src.learn import read_fitted_model
from src.main import EXIT_CONFIG, EXIT_DATA, EXIT_FAILURE, build_parser, cli
from src.ssm import read_manifest


class TestParser:
    """Tests for the argparse surface."""

    def test_common_flags(self):
        args = build_parser().parse_args(
            ["fit-grad", "--config", "run.yaml", "--seed", "4", "--threads", "2", "--set", "em.max_iters=3",
             "--set", "seed=1", "--verbosity", "debug"]
        )
        assert args.handler_id == "fit_grad"
        assert args.seed == 4
        assert args.threads == 2
        assert args.set == ["em.max_iters=3", "seed=1"]
        assert args.verbosity == "DEBUG"

    def test_alias_and_preset(self):
        args = build_parser().parse_args(["tracking", "--preset", "desk"])
        assert args.handler_id == "track_sweep"
        assert args.preset == "desk"
        with pytest.raises(SystemExit):
            build_parser().parse_args(["track-sweep", "--preset", "huge"])

    def test_dump_trace_only_where_supported(self):
        assert build_parser().parse_args(["fit-em", "--dump-trace"]).dump_trace
        assert build_parser().parse_args(["evaluate", "--dump-trace"]).dump_trace
        with pytest.raises(SystemExit):
            build_parser().parse_args(["fit-grad", "--dump-trace"])

    def test_no_command_prints_help(self, capsys):
        assert cli([]) == EXIT_FAILURE
        assert "graph-kalman" in capsys.readouterr().out


class TestExitCodes:
    """Failures map to exit codes with one JSON line on stderr."""

    def test_unknown_config_key(self, run_cli, tmp_path):
        code, _, err = run_cli("simulate", "--out", str(tmp_path), "--set", "bogus=1")
        assert code == EXIT_CONFIG
        assert err[-1]["error"] == "ConfigError"
        assert "bogus" in err[-1]["message"]

    def test_error_names_canonical_command_for_alias(self, run_cli, tmp_path):
        code, _, err = run_cli("tracking", "--out", str(tmp_path), "--set", "bogus=1")
        assert code == EXIT_CONFIG
        assert err[-1]["command"] == "track-sweep"

    def test_missing_dataset_setting(self, run_cli, tmp_path):
        code, _, err = run_cli("fit-em", "--out", str(tmp_path))
        assert code == EXIT_CONFIG
        assert "dataset" in err[-1]["message"]

    def test_missing_manifest(self, run_cli, tmp_path):
        code, _, err = run_cli("fit-em", "--out", str(tmp_path), "--set", f"dataset={tmp_path / 'nope.json'}")
        assert code == EXIT_DATA
        assert err[-1]["error"] == "DataError"

    def test_invalid_model_value(self, run_cli, tiny_config):
        code, _, err = run_cli("simulate", "--config", str(tiny_config), "--set", "model.c=-1")
        assert code == EXIT_CONFIG
        assert "model" in err[-1]["message"]


class TestEndToEnd:
    """simulate -> fit -> evaluate on a tiny configuration."""

    def test_simulate_writes_manifest(self, run_cli, tiny_config, tmp_path):
        code, out, _ = run_cli("simulate", "--config", str(tiny_config))
        assert code == 0
        assert out[-1]["trajectories"] == 2
        manifest = read_manifest(out[-1]["manifest"])
        assert manifest.observed == [0, 1, 2, 4]
        assert [entry.split for entry in manifest.trajectories] == ["train", "train"]
        echo = json.loads((tmp_path / "run" / "config.echo.json").read_text(encoding="utf-8"))
        assert echo["seed"] == 3
        assert echo["simulate"]["steps"] == 30

    def test_simulation_is_seeded(self, run_cli, tiny_config, tmp_path):
        run_cli("simulate", "--config", str(tiny_config), "--out", str(tmp_path / "a"))
        run_cli("simulate", "--config", str(tiny_config), "--out", str(tmp_path / "b"))
        first = (tmp_path / "a" / "traj_000_observations.csv").read_text(encoding="utf-8")
        second = (tmp_path / "b" / "traj_000_observations.csv").read_text(encoding="utf-8")
        assert first == second

    def test_fit_em_then_evaluate(self, run_cli, tiny_config, tmp_path):
        _, out, _ = run_cli("simulate", "--config", str(tiny_config))
        manifest = out[-1]["manifest"]
        fit_dir = tmp_path / "fit"
        code, out, _ = run_cli(
            "fit-em", "--config", str(tiny_config), "--out", str(fit_dir), "--set", f"dataset={manifest}",
            "--dump-trace",
        )
        assert code == 0
        assert 1 <= out[-1]["iterations"] <= 3
        nll = pd.read_csv(fit_dir / "nll_trace.csv")["nll"].to_numpy()
        assert len(nll) == out[-1]["iterations"] + 1
        assert all(later <= earlier + 1e-6 * abs(earlier) for earlier, later in zip(nll, nll[1:]))
        trace = pd.read_csv(fit_dir / "trace.csv")
        assert len(trace) == 30 * 6

        model, trace_from_file = read_fitted_model(out[-1]["model"])
        assert model.mask == (0, 1, 2, 4)
        assert trace_from_file == pytest.approx(list(nll))

        eval_dir = tmp_path / "eval"
        code, out, _ = run_cli(
            "evaluate", "--config", str(tiny_config), "--out", str(eval_dir),
            "--set", f"dataset={manifest}", "--set", "evaluate.target=model",
            "--set", f"evaluate.model={fit_dir / 'model.json'}",
        )
        assert code == 0
        assert set(out[-1]["means"]) == {"kalman/nll", "kalman/filtered_mse_db", "kalman/smoothed_mse_db"}
        assert (eval_dir / "evaluate.csv").exists()

    def test_fit_grad(self, run_cli, tiny_config, tmp_path):
        _, out, _ = run_cli("simulate", "--config", str(tiny_config))
        code, out, _ = run_cli(
            "fit-grad", "--config", str(tiny_config), "--out", str(tmp_path / "grad"),
            "--set", f"dataset={out[-1]['manifest']}",
        )
        assert code == 0
        nll = pd.read_csv(tmp_path / "grad" / "nll_trace.csv")["nll"]
        assert out[-1]["final_nll"] == pytest.approx(nll.iloc[-1])

    @pytest.mark.slow
    def test_train_gknet_then_evaluate_checkpoint(self, run_cli, tiny_config, tmp_path):
        _, out, _ = run_cli("simulate", "--config", str(tiny_config))
        manifest = out[-1]["manifest"]
        common = ["--config", str(tiny_config), "--set", f"dataset={manifest}"]
        code, out, _ = run_cli(
            "train-gknet", *common, "--out", str(tmp_path / "gk"), "--set", "gknet.hidden=[4]",
            "--set", "train.epochs=2", "--set", "train.window=10",
        )
        assert code == 0
        assert (tmp_path / "gk" / "loss_curves.csv").exists()
        code, out, _ = run_cli(
            "evaluate", *common, "--out", str(tmp_path / "gk-eval"), "--set", "evaluate.target=checkpoint",
            "--set", f"evaluate.checkpoint={out[-1]['checkpoint']}",
        )
        assert code == 0
        assert "gknet/mse_db" in out[-1]["means"]
