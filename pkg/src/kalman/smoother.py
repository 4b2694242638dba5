"""Rauch-Tung-Striebel smoother with lag-one covariances."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from ..core.errors import DimensionError
from .filter import FilterTrace, as_system, robust_cho_factor, symmetrize

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SmootherTrace:
    """``means``/``covs`` for t = 0..T; ``lag_covs[t-1]`` = cov(x_t, x_{t-1} | y_1..y_T) and
    ``gains[t]`` = J_t for t = 0..T-1."""

    means: np.ndarray
    covs: np.ndarray
    lag_covs: np.ndarray
    gains: np.ndarray

    @property
    def steps(self) -> int:
        return self.lag_covs.shape[0]


def kalman_smoother(model, trace: FilterTrace) -> SmootherTrace:
    """Backward pass over a complete :class:`FilterTrace`.

    ``model`` must match the state and observation sizes of the system stored in
    the trace; the stored system is what the recursion uses.
    """
    system = trace.system
    expected = as_system(model)
    if (expected.n_state, expected.n_obs) != (system.n_state, system.n_obs):
        raise DimensionError(
            f"model has (n_state, n_obs) = {(expected.n_state, expected.n_obs)} but the trace was filtered with "
            f"{(system.n_state, system.n_obs)}"
        )
    a, h = system.transition, system.observation
    steps, n = trace.steps, system.n_state

    means = trace.means.copy()
    covs = trace.covs.copy()
    gains = np.empty((steps, n, n))
    for t in range(steps, 0, -1):
        factor = robust_cho_factor(trace.pred_covs[t - 1], t, "predicted covariance")
        # J_{t-1} = P+_{t-1} A^T (P-_t)^-1
        gain = sla.cho_solve(factor, a @ trace.covs[t - 1]).T
        gains[t - 1] = gain
        means[t - 1] = trace.means[t - 1] + gain @ (means[t] - trace.pred_means[t - 1])
        covs[t - 1] = symmetrize(trace.covs[t - 1] + gain @ (covs[t] - trace.pred_covs[t - 1]) @ gain.T)

    lag_covs = np.empty((steps, n, n))
    lag_covs[steps - 1] = (np.eye(n) - trace.gains[steps - 1] @ h) @ a @ trace.covs[steps - 1]
    for t in range(steps, 1, -1):
        # V_{t-1} = P+_{t-1} J_{t-2}^T + J_{t-1} (V_t - A P+_{t-1}) J_{t-2}^T
        lag_covs[t - 2] = (
            trace.covs[t - 1] @ gains[t - 2].T
            + gains[t - 1] @ (lag_covs[t - 1] - a @ trace.covs[t - 1]) @ gains[t - 2].T
        )
    return SmootherTrace(means=means, covs=covs, lag_covs=lag_covs, gains=gains)
