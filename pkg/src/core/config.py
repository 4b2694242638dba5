"""Run configuration loader."""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import yaml

from ..bench import PRESETS, TaskConfig, TrackingConfig
from ..gknet import GKNetConfig, TrainConfig
from ..learn import EMConfig, GradConfig
from .errors import ConfigError
from .models import DynamicsKind, Operator, Task, TransitionMode, parse_enum, to_plain

LOGGER = logging.getLogger(__name__)

ECHO_FILE = "config.echo.json"
THREADS_ENV = "GRAPH_KALMAN_THREADS"
EXPERIMENTS = ("forecasting", "imputation", "input-driven")
EVALUATE_TARGETS = ("task", "model", "checkpoint")


@dataclass
class GraphSection:
    """Edge-list file, or a seeded connected ER sample when ``file`` is unset."""

    file: str | None = None
    n: int = 8
    p: float = 0.3


@dataclass
class ModelSection:
    c: float = 0.1
    alpha: float | list[float] = 0.3
    h: list[float] = field(default_factory=lambda: [1.0, -0.5, 0.125])
    filter_operator: Operator = Operator.LAPLACIAN
    sigma2: float = 0.05
    sigma0_2: float = 1.0
    observed: list[int] | None = None
    transition_mode: TransitionMode = TransitionMode.EULER
    dt: float = 1.0
    operator: Operator = Operator.LAPLACIAN
    input_filter: list[float] | None = None

    def __post_init__(self) -> None:
        self.filter_operator = parse_enum(Operator, self.filter_operator, "filter_operator")
        self.transition_mode = parse_enum(TransitionMode, self.transition_mode, "transition_mode")
        self.operator = parse_enum(Operator, self.operator, "operator")


@dataclass
class SimulateSection:
    """``kind: ssm`` draws from the model section; benchmark kinds use the tracking dynamics."""

    kind: DynamicsKind = DynamicsKind.SSM
    steps: int = 200
    trajectories: int = 1
    snr_db: float | None = None
    noise_ratio: float = 0.1
    observed_ratio: float | None = None
    input_rate: float = 0.2

    def __post_init__(self) -> None:
        self.kind = parse_enum(DynamicsKind, self.kind, "kind")
        if self.steps < 1 or self.trajectories < 1:
            raise ValueError("steps and trajectories must be >= 1")


@dataclass
class KernelCheckSection:
    c: float = 1.0
    alpha: float = 1.0
    t: float = 1.0
    s: float = 1.0
    dt: float = 1e-3
    paths: int = 20_000
    tolerance: float = 3.0


@dataclass
class GradCheckSection:
    n: int = 6
    p: float = 0.5
    steps: int = 5
    batch: int = 2
    epsilon: float = 1e-5
    tolerance: float = 1e-4
    nudge: float = 0.05
    tasks: list[Task] = field(default_factory=lambda: list(Task))

    def __post_init__(self) -> None:
        self.tasks = [parse_enum(Task, t, "tasks") for t in self.tasks]
        if self.nudge < 0:
            raise ValueError(f"nudge must be >= 0, got {self.nudge}")


@dataclass
class EvaluateSection:
    """What ``evaluate`` scores: a task experiment, a fitted SSM file or a GKNet checkpoint."""

    target: str = "task"
    experiment: str = "forecasting"
    model: str | None = None
    checkpoint: str | None = None

    def __post_init__(self) -> None:
        if self.target not in EVALUATE_TARGETS:
            raise ValueError(f"target must be one of {EVALUATE_TARGETS}, got {self.target!r}")
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")


@dataclass
class RunConfig:
    """Top-level run settings; ``seed`` and ``threads`` are copied into the sections that carry them."""

    seed: int = 0
    out: str = "runs"
    threads: int = 1
    verbosity: str | None = None
    preset: str | None = None
    dataset: str | None = None
    graph: GraphSection = field(default_factory=GraphSection)
    model: ModelSection = field(default_factory=ModelSection)
    simulate: SimulateSection = field(default_factory=SimulateSection)
    em: EMConfig = field(default_factory=EMConfig)
    grad: GradConfig = field(default_factory=GradConfig)
    gknet: GKNetConfig = field(default_factory=GKNetConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    tracking: TrackingConfig = field(default_factory=TrackingConfig)
    task: TaskConfig = field(default_factory=TaskConfig)
    evaluate: EvaluateSection = field(default_factory=EvaluateSection)
    kernel_check: KernelCheckSection = field(default_factory=KernelCheckSection)
    grad_check: GradCheckSection = field(default_factory=GradCheckSection)

    def __post_init__(self) -> None:
        if self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")
        if self.preset is not None and self.preset not in PRESETS:
            raise ValueError(f"preset must be one of {sorted(PRESETS)}, got {self.preset!r}")
        self.train = dataclasses.replace(self.train, seed=self.seed)
        self.tracking = dataclasses.replace(
            self.tracking,
            seed=self.seed,
            threads=self.threads,
            train=dataclasses.replace(self.tracking.train, seed=self.seed),
        )
        self.task = dataclasses.replace(
            self.task,
            seed=self.seed,
            threads=self.threads,
            train=dataclasses.replace(self.task.train, seed=self.seed),
        )

    @property
    def out_dir(self) -> Path:
        return Path(self.out).expanduser()


def parse_override(item: str) -> tuple[list[str], Any]:
    """``a.b.c=value`` -> (["a", "b", "c"], yaml-parsed value)."""
    key, sep, raw = item.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"override {item!r} must look like dotted.key=value")
    try:
        value = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError as exc:
        raise ConfigError(f"override {key}: cannot parse value {raw!r}: {exc}") from exc
    return key.strip().split("."), value


def apply_override(raw: dict, path: Sequence[str], value: Any) -> None:
    node = raw
    for depth, part in enumerate(path[:-1]):
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigError(f"override {'.'.join(path)}: {'.'.join(path[: depth + 1])} is not a section")
        node = child
    node[path[-1]] = value


def read_config_file(path: Path | str) -> dict:
    """YAML or JSON mapping; JSON parses as YAML."""
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found at {path}") from exc
    except OSError as exc:
        raise ConfigError(f"Failed to read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"Invalid config file {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a mapping at the top level")
    return data


def _section_types(cls: type) -> dict[str, type]:
    hints = typing.get_type_hints(cls)
    return {f.name: hints[f.name] for f in dataclasses.fields(cls) if dataclasses.is_dataclass(hints[f.name])}


def build_section(cls: type, data: Any, path: str = ""):
    """Instantiate dataclass ``cls`` from a mapping, recursing into nested dataclass fields.

    Unknown keys and constructor failures raise ConfigError naming the dotted path.
    """
    label = path or "<root>"
    if isinstance(data, cls):
        return data
    if data is None:
        data = {}
    if not isinstance(data, Mapping):
        raise ConfigError(f"{label}: expected a mapping, got {type(data).__name__}")
    known = {f.name for f in dataclasses.fields(cls) if f.init and not f.name.startswith("_")}
    unknown = sorted(set(data) - known)
    if unknown:
        dotted = ", ".join(f"{path}.{key}" if path else str(key) for key in unknown)
        raise ConfigError(f"unknown config key(s): {dotted}")

    kwargs = dict(data)
    for name, sub_cls in _section_types(cls).items():
        if name in kwargs:
            kwargs[name] = build_section(sub_cls, kwargs[name], f"{path}.{name}" if path else name)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{label}: {exc}") from exc


def load_run_config(
    path: Path | str | None = None,
    overrides: Sequence[str] = (),
    **flags: Any,
) -> RunConfig:
    """File values, then the preset, then ``--set`` overrides, then explicit top-level flags."""
    raw = read_config_file(path) if path else {}
    if "threads" not in raw and os.getenv(THREADS_ENV):
        raw["threads"] = _env_threads()

    for key, value in flags.items():
        if value is not None:
            raw[key] = value
    preset = raw.get("preset")
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"preset must be one of {sorted(PRESETS)}, got {preset!r}")
        tracking = raw.setdefault("tracking", {})
        if not isinstance(tracking, dict):
            raise ConfigError("tracking: expected a mapping")
        tracking.update(PRESETS[preset])

    for item in overrides:
        keys, value = parse_override(item)
        apply_override(raw, keys, value)
    for key, value in flags.items():
        if value is not None:
            raw[key] = value

    config = build_section(RunConfig, raw)
    LOGGER.debug("Resolved run config from %s with %s override(s)", path or "defaults", len(overrides))
    return config


def _env_threads() -> int:
    value = os.getenv(THREADS_ENV, "")
    try:
        return int(value)
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {value!r}") from exc


def config_echo(config: RunConfig) -> dict:
    return to_plain(config)


def write_config_echo(config: RunConfig, out_dir: Path | str | None = None) -> Path:
    """Write the fully resolved config as ``config.echo.json``; feeding it back reproduces the run."""
    out_dir = Path(out_dir) if out_dir is not None else config.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / ECHO_FILE
    path.write_text(json.dumps(config_echo(config), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    LOGGER.info("Wrote config echo to %s", path)
    return path
