"""Subcommand handlers for the graph-kalman CLI."""

from .checks import run_grad_check_command, run_kernel_check_command
from .evaluate import run_evaluate_command
from .fit import run_fit_em_command, run_fit_grad_command
from .gknet import run_train_gknet_command
from .simulate import run_simulate_command
from .sweep import run_track_sweep_command

HANDLERS = {
    "simulate": run_simulate_command,
    "fit_em": run_fit_em_command,
    "fit_grad": run_fit_grad_command,
    "train_gknet": run_train_gknet_command,
    "evaluate": run_evaluate_command,
    "track_sweep": run_track_sweep_command,
    "kernel_check": run_kernel_check_command,
    "grad_check": run_grad_check_command,
}

__all__ = [
    "HANDLERS",
    "run_evaluate_command",
    "run_fit_em_command",
    "run_fit_grad_command",
    "run_grad_check_command",
    "run_kernel_check_command",
    "run_simulate_command",
    "run_track_sweep_command",
    "run_train_gknet_command",
]
