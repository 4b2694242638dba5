"""Tests for benchmark metrics, datasets, windows, reports and small experiment runs."""

import json
import time

import numpy as np
import pandas as pd
import pytest

from src.bench import (
    PRESETS,
    Dataset,
    ExperimentReport,
    Normalizer,
    TaskConfig,
    TrackingConfig,
    concat_windows,
    event_dataset,
    fill_gaps,
    maybe_signal_windows,
    mse_db,
    nrmse,
    random_node_mask,
    reference_system,
    run_cells,
    run_forecasting_experiment,
    run_imputation_experiment,
    run_input_driven_experiment,
    run_tracking_experiment,
    scatter_observations,
    signal_windows,
    sliding_windows,
    tracking_data,
    tracking_windows,
)
from src.bench.tracking import least_squares_dynamics
from src.core.errors import DataError, DimensionError, TrainingAborted
from src.gknet import GKNetConfig, TrainConfig
from src.learn import EMConfig
from src.ssm import Trajectory


def tiny_train() -> TrainConfig:
    return TrainConfig(lr=1e-2, batch_size=4, epochs=2, patience=5, window=6)


class TestMetrics:
    """Tests for nRMSE and MSE in dB."""

    def test_nrmse_values(self):
        target = np.array([[1.0, 1.0]])
        assert nrmse(target, target) == 0.0
        assert nrmse(np.zeros_like(target), target) == pytest.approx(1.0)
        assert nrmse(np.array([[1.0, 0.0]]), target) == pytest.approx(1.0 / np.sqrt(2.0))

    def test_nrmse_scale_invariant(self, rng):
        predicted, target = rng.standard_normal((4, 5)), rng.standard_normal((4, 5))
        assert nrmse(7.5 * predicted, 7.5 * target) == pytest.approx(nrmse(predicted, target))

    def test_nrmse_mask(self):
        target = np.array([1.0, 2.0, 3.0])
        predicted = np.array([1.0, 2.0, 100.0])
        assert nrmse(predicted, target, mask=[True, True, False]) == 0.0

    def test_nrmse_errors(self):
        with pytest.raises(DataError, match="zero target"):
            nrmse(np.ones(3), np.zeros(3))
        with pytest.raises(DimensionError):
            nrmse(np.ones(3), np.ones(4))

    def test_mse_db(self):
        truth = np.zeros((3, 4))
        assert mse_db(np.full((3, 4), 0.1), truth) == pytest.approx(-20.0)
        assert mse_db(truth, truth) == -300.0


class TestDataset:
    """Tests for chronological splits and segments."""

    def test_bounds_and_segments(self, p3):
        data = Dataset(graph=p3, signals=np.arange(30.0).reshape(3, 10))
        print(f"\n OUTPUT: {data.bounds()}")
        assert data.bounds() == {"train": (0, 7), "validation": (7, 8), "test": (8, 10)}
        test = data.segment("test")
        np.testing.assert_array_equal(test.signals, data.signals[:, 8:])
        assert test.split == {"test": 1.0}
        assert data.segment("train", fraction=0.3).steps == 3

    def test_validation(self, p3):
        with pytest.raises(DimensionError):
            Dataset(graph=p3, signals=np.zeros((2, 5)))
        with pytest.raises(DimensionError, match="mask"):
            Dataset(graph=p3, signals=np.zeros((3, 5)), mask=np.ones((3, 4)))
        with pytest.raises(DataError, match="sum to 1"):
            Dataset(graph=p3, signals=np.zeros((3, 5)), split={"train": 0.5, "test": 0.4})
        with pytest.raises(DataError, match="split names"):
            Dataset(graph=p3, signals=np.zeros((3, 5)), split={"train": 0.5, "holdout": 0.5})

    def test_event_needs_inputs(self, p3):
        event = Trajectory(states=np.zeros((3, 5)), observations=np.zeros((3, 4)), seed=0)
        with pytest.raises(DataError, match="no input signal"):
            event_dataset(p3, event, window=2)

    def test_event_alignment(self, p3):
        """Input column t drives signal column t + 1."""
        obs = np.arange(12.0).reshape(3, 4)
        event = Trajectory(states=np.zeros((3, 5)), observations=obs, seed=0, inputs=obs + 100.0)
        data = event_dataset(p3, event, window=2)
        np.testing.assert_array_equal(data.signals, obs[:, :-1])
        np.testing.assert_array_equal(data.inputs, obs[:, 1:] + 100.0)


class TestWindows:
    """Tests for masks, windows, gap filling and scaling."""

    def test_random_node_mask(self, rng):
        mask = random_node_mask(10, 0.5, rng)
        assert len(mask) == 5
        assert list(mask) == sorted(set(mask.tolist()))
        assert len(random_node_mask(10, 0.01, rng)) == 1
        for ratio in (0.0, 1.5):
            with pytest.raises(ValueError):
                random_node_mask(10, ratio, rng)

    def test_sliding_windows(self):
        matrix = np.arange(14.0).reshape(2, 7)
        windows = sliding_windows(matrix, 3)
        assert windows.shape == (2, 3, 2)
        np.testing.assert_array_equal(windows[1], matrix[:, 3:6].T)
        assert sliding_windows(matrix, 3, stride=1).shape == (5, 3, 2)
        assert sliding_windows(matrix, 8).shape == (0, 8, 2)

    def test_signal_windows_shift(self, p3):
        data = Dataset(graph=p3, signals=np.arange(30.0).reshape(3, 10))
        windows = signal_windows(data, 3, horizon=1, observed_nodes=[0], stride=1)
        assert len(windows) == 7
        np.testing.assert_array_equal(windows.observations[0], data.signals[:, 0:3].T)
        np.testing.assert_array_equal(windows.targets[0], data.signals[:, 1:4].T)
        np.testing.assert_array_equal(windows.obs_mask[0, 0], [True, False, False])
        np.testing.assert_array_equal(windows.target_mask[0, 0], [True, False, False])
        scored = signal_windows(data, 3, observed_nodes=[0], score_all=True)
        assert scored.target_mask.all()

    def test_short_segments(self, p3):
        data = Dataset(graph=p3, signals=np.zeros((3, 4)))
        with pytest.raises(DataError, match="too short"):
            signal_windows(data, 4, horizon=1)
        assert maybe_signal_windows(data, 4, horizon=1) is None
        assert maybe_signal_windows(data, 4) is not None

    def test_concat_windows(self, p3):
        data = Dataset(graph=p3, signals=np.ones((3, 6)))
        bare = signal_windows(data, 3)
        assert len(concat_windows([bare, bare])) == 4
        stripped = type(bare)(bare.observations, bare.targets)
        with pytest.raises(DataError, match="disagree"):
            concat_windows([bare, stripped])
        with pytest.raises(DataError):
            concat_windows([])

    def test_tracking_windows(self):
        traj = Trajectory(states=np.arange(15.0).reshape(3, 5), observations=np.ones((2, 4)), seed=0)
        padded = scatter_observations(traj, 3, [0, 2])
        np.testing.assert_array_equal(padded[1], 0.0)
        windows = tracking_windows([traj, traj], 3, [0, 2], 2)
        assert windows.observations.shape == (4, 2, 3)
        np.testing.assert_array_equal(windows.targets[0], traj.states[:, 1:3].T)
        np.testing.assert_array_equal(windows.obs_mask[0, 0], [True, False, True])

    def test_fill_gaps(self):
        signals = np.array([[1.0, 0.0, 3.0, 0.0], [5.0, 5.0, 5.0, 5.0], [0.0, 0.0, 0.0, 0.0]])
        mask = np.array([[True, False, True, False], [True] * 4, [False] * 4])
        filled = fill_gaps(signals, mask)
        print(f"\n OUTPUT: {filled.tolist()}")
        np.testing.assert_allclose(filled[0], [1.0, 2.0, 3.0, 3.0])
        np.testing.assert_allclose(filled[1], 5.0)
        np.testing.assert_allclose(filled[2], 0.0)

    def test_normalizer(self):
        values = np.array([[1.0, 2.0], [3.0, 100.0]])
        mask = np.array([[True, True], [True, False]])
        scaler = Normalizer.fit(values, mask)
        assert scaler.mean == pytest.approx(2.0)
        np.testing.assert_allclose(scaler.invert(scaler.apply(values)), values)
        assert Normalizer.fit(np.full((2, 2), 4.0)).std == 1.0
        with pytest.raises(DataError):
            Normalizer.fit(values, np.zeros_like(mask))


class TestReport:
    """Tests for experiment reports and the cell runner."""

    def test_add_requires_scenario(self):
        report = ExperimentReport(name="demo", scenario_keys=("snr_db",))
        with pytest.raises(ValueError, match="snr_db"):
            report.add("gknet", "mse_db", -10.0, seed=1)

    def test_write_sorted(self, tmp_path):
        report = ExperimentReport(name="demo", scenario_keys=("snr_db",), assumptions=["none"])
        report.add("gknet", "mse_db", -12.0, seed=2, snr_db=10.0)
        report.add("gknet", "mse_db", -8.0, seed=1, snr_db=0.0)
        report.add("kalman-reference", "mse_db", -9.0, seed=1, snr_db=0.0)
        csv_path, json_path = report.write(tmp_path)
        frame = pd.read_csv(csv_path)
        assert list(frame.columns) == ["snr_db", "method", "metric", "value", "seed"]
        assert list(frame["snr_db"]) == [0.0, 0.0, 10.0]
        summary = json.loads(json_path.read_text(encoding="utf-8"))
        print(f"\n OUTPUT: {summary['means']}")
        assert summary["means"]["gknet/mse_db"] == pytest.approx(-10.0)
        assert summary["rows"] == 3

    def test_run_cells_keeps_order(self):
        def cell(i, delay):
            def run():
                time.sleep(delay)
                return [{"cell": i, "method": "m", "metric": "x", "value": float(i), "seed": i}]

            return run

        report = ExperimentReport(name="order", scenario_keys=("cell",))
        run_cells(report, [cell(i, 0.05 * (3 - i)) for i in range(4)], threads=4)
        assert [row["cell"] for row in report.rows] == [0, 1, 2, 3]
        assert report.wall_clock > 0

    def test_abort_carries_partial_report(self):
        def good():
            return [{"cell": 0, "method": "m", "metric": "x", "value": 1.0, "seed": 0}]

        def bad():
            raise TrainingAborted(3, 1)

        report = ExperimentReport(name="abort", scenario_keys=("cell",))
        with pytest.raises(TrainingAborted) as info:
            run_cells(report, [good, bad])
        assert info.value.report is report
        assert len(report.rows) == 1


class TestExperimentConfigs:
    """Tests for task and tracking experiment settings."""

    def test_task_config_validation(self):
        with pytest.raises(ValueError, match="methods"):
            TaskConfig(methods=("gknet", "lstm"))
        with pytest.raises(ValueError):
            TaskConfig(horizons=(0,))
        with pytest.raises(ValueError):
            TaskConfig(train_fractions=(1.2,))
        assert TaskConfig(horizons=[1, 2]).horizons == (1, 2)

    def test_tracking_config_validation(self):
        with pytest.raises(ValueError):
            TrackingConfig(kind="ssm")
        with pytest.raises(ValueError):
            TrackingConfig(graph_modes=("exact",))
        with pytest.raises(ValueError):
            TrackingConfig(validation_fraction=0.5, test_fraction=0.5)

    def test_presets(self):
        desk = TrackingConfig().with_preset("desk")
        assert (desk.n, desk.trajectories, desk.steps) == (16, 200, 100)
        assert TrackingConfig().with_preset("full").n == PRESETS["full"]["n"]
        with pytest.raises(ValueError, match="unknown preset"):
            TrackingConfig().with_preset("huge")

    def test_imputation_needs_hidden_nodes(self):
        with pytest.raises(ValueError, match="nothing to impute"):
            run_imputation_experiment(TaskConfig(observation_ratios=(1.0,)))

    def test_input_driven_event_budget(self):
        config = TaskConfig(n=6, p=0.5, steps=20, events=3, test_events=1, event_counts=(5,))
        with pytest.raises(ValueError, match="exceed"):
            run_input_driven_experiment(config)


class TestTrackingReference:
    """Tests for the reference filters of the tracking sweep."""

    def test_least_squares_recovers_affine_map(self, rng):
        a = 0.5 * np.eye(3) + 0.1 * rng.standard_normal((3, 3))
        b = np.array([0.2, -0.1, 0.0])
        trajs = []
        for _ in range(3):
            states = [rng.standard_normal(3)]
            for _ in range(10):
                states.append(a @ states[-1] + b)
            trajs.append(Trajectory(states=np.array(states).T, observations=np.zeros((3, 10)), seed=0))
        a_hat, b_hat, _ = least_squares_dynamics(trajs)
        np.testing.assert_allclose(a_hat, a, atol=1e-8)
        np.testing.assert_allclose(b_hat, b, atol=1e-8)

    def test_linear_reference_uses_graph_operator(self):
        config = TrackingConfig(n=8, p=0.4, trajectories=5, steps=10, snrs=(10.0,))
        data = tracking_data(config, 10.0)
        system, offset = reference_system(config, data, data.graph)
        assert offset is None
        np.testing.assert_allclose(system.transition, data.graph.operator(data.spec.operator).toarray())
        assert system.observation.shape == (len(data.observed), 8)
        assert len(data.train) + len(data.validation) + len(data.test) == 5


@pytest.mark.slow
class TestSmallRuns:
    """End-to-end experiment runs on tiny synthetic settings."""

    def test_tracking_sweep(self, tmp_path):
        config = TrackingConfig(
            n=8, p=0.4, trajectories=10, steps=20, snrs=(10.0,),
            gknet=GKNetConfig(task="tracking", hidden=(4,)), train=tiny_train(), seed=1,
        )
        report = run_tracking_experiment(config)
        frame = report.frame()
        print(f"\n OUTPUT: {frame.to_dict('records')}")
        assert len(frame) == 4
        assert set(frame["method"]) == {"gknet", "kalman-reference"}
        assert np.all(np.isfinite(frame["value"]))
        csv_path, _ = report.write(tmp_path)
        assert csv_path.name == "tracking.csv"

    def test_tracking_is_reproducible(self):
        config = TrackingConfig(
            kind="nonlinear-benchmark", n=8, p=0.4, trajectories=8, steps=12, snrs=(0.0,), graph_modes=("true",),
            gknet=GKNetConfig(task="tracking", hidden=(4,)), train=tiny_train(), threads=2,
        )
        first = run_tracking_experiment(config).frame()
        second = run_tracking_experiment(config).frame()
        pd.testing.assert_frame_equal(first, second)

    def test_forecasting_and_imputation(self):
        config = TaskConfig(
            n=8, p=0.4, steps=80, window=6, horizons=(1,), observation_ratios=(0.5,), methods=("gknet", "em"),
            gknet=GKNetConfig(hidden=(4,)), train=tiny_train(), em=EMConfig(max_iters=3),
        )
        forecast = run_forecasting_experiment(config).frame()
        impute = run_imputation_experiment(config).frame()
        assert list(forecast["method"]) == ["em", "gknet"]
        assert list(impute["method"]) == ["em", "gknet"]
        assert np.all(forecast["value"] > 0) and np.all(impute["value"] > 0)

    def test_exact_graph_gives_identical_true_and_noisy_rows(self):
        config = TrackingConfig(
            n=8, p=0.4, trajectories=8, steps=12, snrs=(10.0,), graph_modes=("true", "noisy"), sigma_e=0.0,
            gknet=GKNetConfig(task="tracking", hidden=(4,)), train=tiny_train(), seed=1,
        )
        frame = run_tracking_experiment(config).frame()
        print(f"\n OUTPUT: {frame.to_dict('records')}")
        for method in ("kalman-reference", "gknet"):
            rows = frame[frame["method"] == method].set_index("graph_mode")
            assert rows.loc["true", "value"] == rows.loc["noisy", "value"]
            assert rows.loc["true", "seed"] == rows.loc["noisy", "seed"]

    def test_rerun_writes_byte_identical_csv(self, tmp_path):
        config = TrackingConfig(
            n=8, p=0.4, trajectories=8, steps=12, snrs=(5.0, 15.0), graph_modes=("true", "noisy"),
            gknet=GKNetConfig(task="tracking", hidden=(4,)), train=tiny_train(), seed=3, threads=2,
        )
        first_csv, first_json = run_tracking_experiment(config).write(tmp_path / "a")
        second_csv, _ = run_tracking_experiment(config).write(tmp_path / "b")
        assert first_csv.read_bytes() == second_csv.read_bytes()
        assert "wall_clock_seconds" in json.loads(first_json.read_text())
        assert b"wall_clock" not in first_csv.read_bytes()

    def test_desk_preset_meets_tracking_bounds(self):
        config = TrackingConfig(snrs=(20.0,), graph_modes=("true", "noisy"), sigma_e=0.1).with_preset("desk")
        frame = run_tracking_experiment(config).frame()
        print(f"\n INPUT: desk preset, 20 dB\n OUTPUT: {frame.to_dict('records')}")
        value = frame.set_index(["graph_mode", "method"])["value"]
        reference, learned = value["true", "kalman-reference"], value["true", "gknet"]
        assert reference <= -20.0
        assert learned <= reference + 6.0
        assert value["noisy", "gknet"] <= learned + 4.0
        for mode in ("true", "noisy"):
            assert value[mode, "kalman-reference"] <= value[mode, "gknet"] + 1.0
