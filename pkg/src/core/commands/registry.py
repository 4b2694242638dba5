"""Central registry of the graph-kalman subcommands."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple


@dataclass(frozen=True)
class CommandSpec:
    """Metadata describing a single subcommand."""

    name: str
    handler_id: str
    usage: str
    description: str
    aliases: Tuple[str, ...] = ()
    dump_trace: bool = False

    @property
    def all_names(self) -> Tuple[str, ...]:
        return (self.name, *self.aliases)

    def alias_display(self) -> str:
        """Return formatted alias hint for help output."""
        if not self.aliases:
            return ""
        return f" (aliases: {', '.join(self.aliases)})"


def _build_specs() -> Tuple[CommandSpec, ...]:
    return (
        CommandSpec(
            name="simulate",
            handler_id="simulate",
            usage="graph-kalman simulate --config PATH",
            description="Draw trajectories from the graph SSM or a tracking benchmark and write a dataset manifest.",
        ),
        CommandSpec(
            name="fit-em",
            handler_id="fit_em",
            usage="graph-kalman fit-em --config PATH [--dump-trace]",
            description="Fit (h, alpha, sigma2) by expectation-maximization on a dataset manifest.",
            dump_trace=True,
        ),
        CommandSpec(
            name="fit-grad",
            handler_id="fit_grad",
            usage="graph-kalman fit-grad --config PATH",
            description="Fit the same model by direct gradient descent on the likelihood.",
        ),
        CommandSpec(
            name="train-gknet",
            handler_id="train_gknet",
            usage="graph-kalman train-gknet --config PATH",
            description="Train GKNet on a dataset manifest and write a checkpoint plus loss curves.",
        ),
        CommandSpec(
            name="evaluate",
            handler_id="evaluate",
            usage="graph-kalman evaluate --config PATH [--dump-trace]",
            description="Run a forecasting/imputation/input-driven experiment or score a fitted model or checkpoint.",
            dump_trace=True,
        ),
        CommandSpec(
            name="track-sweep",
            handler_id="track_sweep",
            usage="graph-kalman track-sweep --config PATH [--preset desk|full]",
            description="Tracking MSE sweep over SNR and true/noisy graphs against the exact Kalman reference.",
            aliases=("tracking",),
        ),
        CommandSpec(
            name="kernel-check",
            handler_id="kernel_check",
            usage="graph-kalman kernel-check --config PATH",
            description="Compare Monte-Carlo SPDE covariances with the closed-form kernel.",
        ),
        CommandSpec(
            name="grad-check",
            handler_id="grad_check",
            usage="graph-kalman grad-check --config PATH",
            description="Finite-difference check of every trainable GKNet block and the full loss.",
        ),
    )


COMMAND_SPECS: Tuple[CommandSpec, ...] = _build_specs()
COMMAND_LOOKUP: Dict[str, CommandSpec] = {
    key: spec for spec in COMMAND_SPECS for key in spec.all_names
}


def get_command_spec(name: str) -> Optional[CommandSpec]:
    """Return the command spec for a given name or alias."""
    return COMMAND_LOOKUP.get(name.lower())


def iter_command_specs() -> Sequence[CommandSpec]:
    """Return the immutable list of command specs in display order."""
    return COMMAND_SPECS
