"""Maximum-likelihood identification: EM and the direct gradient baseline."""

from .em import EMConfig, FitResult, MStepConfig, e_step, em_fit, initial_model, m_step
from .gradient import GradConfig, grad_fit, parameter_gradient, state_gradient
from .io import model_to_dict, read_fitted_model, write_fitted_model
from .likelihood import (
    SufficientStats,
    expected_nll,
    expected_nll_tensor,
    filter_basis,
    nll,
    point_stats,
    sigma2_closed_form,
    sufficient_stats,
    transition_tensor,
)

__all__ = [
    "EMConfig",
    "FitResult",
    "GradConfig",
    "MStepConfig",
    "SufficientStats",
    "e_step",
    "em_fit",
    "expected_nll",
    "expected_nll_tensor",
    "filter_basis",
    "grad_fit",
    "initial_model",
    "m_step",
    "model_to_dict",
    "nll",
    "parameter_gradient",
    "point_stats",
    "read_fitted_model",
    "sigma2_closed_form",
    "state_gradient",
    "sufficient_stats",
    "transition_tensor",
    "write_fitted_model",
]
