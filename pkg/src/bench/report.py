"""Experiment reports: a metric CSV and a JSON summary."""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import pandas as pd

from ..core.errors import TrainingAborted

LOGGER = logging.getLogger(__name__)

FLOAT_FORMAT = "%.10g"
METRIC_COLUMNS = ["method", "metric", "value", "seed"]


@dataclass
class ExperimentReport:
    """Metric rows keyed by scenario; every row carries the seed that produced it."""

    name: str
    scenario_keys: tuple[str, ...]
    rows: list[dict] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    assumptions: list[str] = field(default_factory=list)
    wall_clock: float = 0.0

    def add(self, method: str, metric: str, value: float, seed: int, **scenario) -> None:
        missing = set(self.scenario_keys) - set(scenario)
        if missing:
            raise ValueError(f"row is missing scenario keys: {', '.join(sorted(missing))}")
        self.rows.append({**scenario, "method": method, "metric": metric, "value": float(value), "seed": int(seed)})

    def extend(self, rows: list[dict]) -> None:
        self.rows.extend(rows)

    def frame(self) -> pd.DataFrame:
        columns = list(self.scenario_keys) + METRIC_COLUMNS
        frame = pd.DataFrame(self.rows, columns=columns)
        if frame.empty:
            return frame
        return frame.sort_values(list(self.scenario_keys) + ["method", "metric"], kind="stable").reset_index(drop=True)

    def summary(self) -> dict:
        frame = self.frame()
        means = {}
        if not frame.empty:
            grouped = frame.groupby(["method", "metric"], sort=True)["value"].mean()
            means = {f"{method}/{metric}": float(value) for (method, metric), value in grouped.items()}
        return {
            "name": self.name,
            "rows": len(frame),
            "scenario_keys": list(self.scenario_keys),
            "means": means,
            "assumptions": list(self.assumptions),
            "config": self.config,
            "wall_clock_seconds": round(self.wall_clock, 3),
        }

    def write(self, out_dir: Path | str) -> tuple[Path, Path]:
        """Write ``<name>.csv`` and ``<name>.json``; the CSV holds only seed-determined values."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / f"{self.name}.csv"
        json_path = out_dir / f"{self.name}.json"
        self.frame().to_csv(csv_path, index=False, float_format=FLOAT_FORMAT)
        json_path.write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        LOGGER.info("Wrote %s rows to %s", len(self.rows), csv_path)
        return csv_path, json_path


def run_cells(report: ExperimentReport, cells: list[Callable[[], list[dict]]], threads: int = 1) -> ExperimentReport:
    """Run independent scenario cells on up to ``threads`` workers and collect their rows.

    Rows land in cell order whatever the scheduling. A training abort re-raises
    with the rows finished so far attached as ``report``.
    """
    started = time.perf_counter()
    pool = ThreadPoolExecutor(max_workers=max(threads, 1))
    try:
        for future in [pool.submit(cell) for cell in cells]:
            report.extend(future.result())
    except TrainingAborted as exc:
        report.wall_clock += time.perf_counter() - started
        exc.report = report
        raise
    finally:
        pool.shutdown(wait=True, cancel_futures=True)
    report.wall_clock += time.perf_counter() - started
    return report
