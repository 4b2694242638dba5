"""Exact Kalman filter for graph state-space models and generic linear-Gaussian systems."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
import scipy.linalg as sla

from ..core.errors import DataError, DimensionError, SingularCovarianceError
from ..ssm.model import LinearGaussianSystem

LOGGER = logging.getLogger(__name__)

JITTER = 1e-10
LOG_2PI = float(np.log(2.0 * np.pi))


def as_system(model) -> LinearGaussianSystem:
    """Accept a StateSpaceModel or a LinearGaussianSystem."""
    return model.linear_system()


def symmetrize(mat: np.ndarray) -> np.ndarray:
    return 0.5 * (mat + mat.T)


def robust_cho_factor(mat: np.ndarray, time_index: int, what: str = "covariance"):
    """Cholesky factor of a symmetric matrix; retries once with 1e-10 I jitter."""
    try:
        return sla.cho_factor(mat, lower=True)
    except (sla.LinAlgError, ValueError):
        pass
    LOGGER.warning("singular %s at t=%s; adding %.0e jitter", what, time_index, JITTER)
    try:
        return sla.cho_factor(mat + JITTER * np.eye(mat.shape[0]), lower=True)
    except (sla.LinAlgError, ValueError) as exc:
        raise SingularCovarianceError(time_index, what) from exc


@dataclass(frozen=True, eq=False)
class FilterTrace:
    """Forward-pass record.

    ``means``/``covs`` hold x_t^+ and P_t^+ for t = 0..T (row 0 is the prior);
    ``pred_means``/``pred_covs``/``gains``/``innovation_terms`` hold t = 1..T at row t-1.
    ``innovation_terms`` are 0.5 (log|S_t| + e_t^T S_t^-1 e_t) without constants.
    """

    system: LinearGaussianSystem
    means: np.ndarray
    covs: np.ndarray
    pred_means: np.ndarray
    pred_covs: np.ndarray
    gains: np.ndarray
    innovation_terms: np.ndarray
    inputs: np.ndarray | None = None

    @property
    def steps(self) -> int:
        return self.pred_means.shape[0]

    def nll(self, constants: bool = False) -> float:
        """Observed-data negative log-likelihood -log p(y_1..y_T) from the innovations."""
        total = float(np.sum(self.innovation_terms))
        if constants:
            total += 0.5 * self.steps * self.system.n_obs * LOG_2PI
        return total


def kf_predict(
    prev_mean: np.ndarray, prev_cov: np.ndarray, model, u: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """x^- = A x + G u, P^- = A P A^T + Q."""
    system = as_system(model)
    a = system.transition
    mean = a @ prev_mean
    if u is not None:
        if system.input_matrix is None:
            raise DataError("model has no input filter but an input signal was given")
        mean = mean + system.input_matrix @ u
    cov = symmetrize(a @ prev_cov @ a.T + system.process_cov)
    return mean, cov


def kf_correct(
    pred_mean: np.ndarray, pred_cov: np.ndarray, y: np.ndarray, model, time_index: int = 0
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (K, x^+, P^+), with P^+ in Joseph form."""
    mean, cov, gain, _ = _correct(pred_mean, pred_cov, y, as_system(model), time_index)
    return gain, mean, cov


def _correct(pred_mean, pred_cov, y, system: LinearGaussianSystem, time_index: int):
    y = np.asarray(y, dtype=float)
    if y.shape != (system.n_obs,):
        raise DimensionError(f"observation at t={time_index} has shape {y.shape}, expected ({system.n_obs},)")
    if not np.all(np.isfinite(y)):
        raise DataError(f"non-finite observation at t={time_index}")
    h, r = system.observation, system.obs_cov
    innov_cov = symmetrize(h @ pred_cov @ h.T + r)
    factor = robust_cho_factor(innov_cov, time_index, "innovation covariance")
    gain = sla.cho_solve(factor, h @ pred_cov).T
    innovation = y - h @ pred_mean

    mean = pred_mean + gain @ innovation
    joseph = np.eye(system.n_state) - gain @ h
    cov = symmetrize(joseph @ pred_cov @ joseph.T + gain @ r @ gain.T)

    log_det = 2.0 * np.sum(np.log(np.diag(factor[0])))
    mahal = innovation @ sla.cho_solve(factor, innovation)
    return mean, cov, gain, 0.5 * (log_det + mahal)


def _check_inputs(system: LinearGaussianSystem, inputs, steps: int):
    if inputs is None:
        if system.input_matrix is not None:
            raise DataError("input-driven model needs an input signal matrix")
        return None
    inputs = np.asarray(inputs, dtype=float)
    if inputs.shape != (system.n_state, steps):
        raise DimensionError(f"inputs must have shape {(system.n_state, steps)}, got {inputs.shape}")
    return inputs


def kalman_filter(model, observations: np.ndarray, inputs: np.ndarray | None = None) -> FilterTrace:
    """Forward recursion from (x_0, P_0) over y_1..y_T (columns of ``observations``)."""
    system = as_system(model)
    observations = np.asarray(observations, dtype=float)
    if observations.ndim != 2 or observations.shape[0] != system.n_obs:
        raise DimensionError(
            f"observations must have shape ({system.n_obs}, T), got {observations.shape}"
        )
    steps = observations.shape[1]
    inputs = _check_inputs(system, inputs, steps)
    n, n_obs = system.n_state, system.n_obs

    means = np.empty((steps + 1, n))
    covs = np.empty((steps + 1, n, n))
    pred_means = np.empty((steps, n))
    pred_covs = np.empty((steps, n, n))
    gains = np.empty((steps, n, n_obs))
    terms = np.empty(steps)
    means[0], covs[0] = system.init_mean, system.init_cov

    for t in range(1, steps + 1):
        u = None if inputs is None else inputs[:, t - 1]
        x_pred, p_pred = kf_predict(means[t - 1], covs[t - 1], system, u)
        mean, cov, gain, term = _correct(x_pred, p_pred, observations[:, t - 1], system, t)
        pred_means[t - 1], pred_covs[t - 1] = x_pred, p_pred
        means[t], covs[t], gains[t - 1], terms[t - 1] = mean, cov, gain, term

    return FilterTrace(
        system=system,
        means=means,
        covs=covs,
        pred_means=pred_means,
        pred_covs=pred_covs,
        gains=gains,
        innovation_terms=terms,
        inputs=inputs,
    )


def observed_nll(
    model, observations: np.ndarray, inputs: np.ndarray | None = None, constants: bool = False
) -> float:
    return kalman_filter(model, observations, inputs).nll(constants=constants)


def dump_trace_csv(trace: FilterTrace, path: Path | str, smoothed=None) -> Path:
    """Per-step, per-node means and marginal variances (plus smoothed ones when given)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    steps, n = trace.steps, trace.system.n_state
    t_index = np.repeat(np.arange(1, steps + 1), n)
    node = np.tile(np.arange(n), steps)
    columns = {
        "t": t_index,
        "node": node,
        "predicted_mean": trace.pred_means.reshape(-1),
        "predicted_var": np.diagonal(trace.pred_covs, axis1=1, axis2=2).reshape(-1),
        "filtered_mean": trace.means[1:].reshape(-1),
        "filtered_var": np.diagonal(trace.covs[1:], axis1=1, axis2=2).reshape(-1),
    }
    if smoothed is not None:
        columns["smoothed_mean"] = smoothed.means[1:].reshape(-1)
        columns["smoothed_var"] = np.diagonal(smoothed.covs[1:], axis1=1, axis2=2).reshape(-1)
    frame = pd.DataFrame(columns)
    frame["predicted_cov_trace"] = np.repeat(np.trace(trace.pred_covs, axis1=1, axis2=2), n)
    frame["filtered_cov_trace"] = np.repeat(np.trace(trace.covs[1:], axis1=1, axis2=2), n)
    frame.to_csv(path, index=False, float_format="%.17g")
    LOGGER.debug("wrote filter trace with %s steps to %s", steps, path)
    return path
