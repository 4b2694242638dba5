"""Dense brute-force references used by the filter, smoother and likelihood tests."""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
from scipy.stats import multivariate_normal

from src.ssm import LinearGaussianSystem

LOG_2PI = float(np.log(2.0 * np.pi))


def random_system(rng: np.random.Generator, n: int, n_obs: int) -> LinearGaussianSystem:
    """Stable random system with full-rank noise covariances and a nonzero prior mean."""
    a = rng.standard_normal((n, n))
    a *= 0.9 / max(1.0, float(np.max(np.abs(np.linalg.eigvals(a)))))
    q_root = rng.standard_normal((n, n))
    r_root = rng.standard_normal((n_obs, n_obs))
    p_root = rng.standard_normal((n, n))
    return LinearGaussianSystem(
        transition=a,
        process_cov=0.5 * q_root @ q_root.T / n + 0.1 * np.eye(n),
        observation=rng.standard_normal((n_obs, n)),
        obs_cov=0.3 * r_root @ r_root.T / n_obs + 0.2 * np.eye(n_obs),
        init_mean=rng.standard_normal(n),
        init_cov=p_root @ p_root.T / n + 0.5 * np.eye(n),
    )


def sample_observations(system: LinearGaussianSystem, steps: int, rng: np.random.Generator) -> np.ndarray:
    n = system.n_state
    x = rng.multivariate_normal(system.init_mean, system.init_cov)
    ys = []
    for _ in range(steps):
        x = system.transition @ x + rng.multivariate_normal(np.zeros(n), system.process_cov)
        ys.append(system.observation @ x + rng.multivariate_normal(np.zeros(system.n_obs), system.obs_cov))
    return np.column_stack(ys)


def joint_gaussian(system: LinearGaussianSystem, steps: int):
    """Prior of X = (x_0..x_T) plus the stacked observation map and noise.

    x_t = A^t x_0 + sum_{k<=t} A^{t-k} w_k, so X = Phi eps with eps = (x_0, w_1..w_T).
    """
    n, n_obs = system.n_state, system.n_obs
    powers = [np.eye(n)]
    for _ in range(steps):
        powers.append(system.transition @ powers[-1])

    phi = np.zeros(((steps + 1) * n, (steps + 1) * n))
    for t in range(steps + 1):
        for k in range(t + 1):
            phi[t * n:(t + 1) * n, k * n:(k + 1) * n] = powers[t - k]
    noise = sla.block_diag(system.init_cov, *([system.process_cov] * steps))
    cov_x = phi @ noise @ phi.T
    mean_x = np.concatenate([powers[t] @ system.init_mean for t in range(steps + 1)])

    h_big = np.zeros((steps * n_obs, (steps + 1) * n))
    for t in range(1, steps + 1):
        h_big[(t - 1) * n_obs:t * n_obs, t * n:(t + 1) * n] = system.observation
    r_big = sla.block_diag(*([system.obs_cov] * steps))
    return mean_x, cov_x, h_big, r_big


def condition(system: LinearGaussianSystem, observations: np.ndarray, upto: int | None = None):
    """Posterior mean (T+1, n) and joint covariance of X given y_1..y_upto."""
    n, n_obs = system.n_state, system.n_obs
    steps = observations.shape[1]
    upto = steps if upto is None else upto
    mean_x, cov_x, h_big, r_big = joint_gaussian(system, steps)
    rows = slice(0, upto * n_obs)
    h, r = h_big[rows], r_big[rows, rows]
    y = observations[:, :upto].T.reshape(-1)

    innov_cov = h @ cov_x @ h.T + r
    gain = np.linalg.solve(innov_cov, h @ cov_x).T
    post_mean = mean_x + gain @ (y - h @ mean_x)
    post_cov = cov_x - gain @ h @ cov_x
    return post_mean.reshape(steps + 1, n), post_cov


def block(cov: np.ndarray, n: int, i: int, j: int) -> np.ndarray:
    return cov[i * n:(i + 1) * n, j * n:(j + 1) * n]


def explicit_nll(system: LinearGaussianSystem, observations: np.ndarray) -> float:
    """-log p(y_1..y_T) from the stacked joint density."""
    steps = observations.shape[1]
    mean_x, cov_x, h_big, r_big = joint_gaussian(system, steps)
    y = observations.T.reshape(-1)
    return float(-multivariate_normal(h_big @ mean_x, h_big @ cov_x @ h_big.T + r_big).logpdf(y))


def singular_gaussian_nll(x: np.ndarray, cov: np.ndarray, tol: float = 1e-10) -> float:
    """-log density of x under N(0, cov) restricted to range(cov)."""
    lam, vec = np.linalg.eigh(cov)
    keep = lam > tol * max(1.0, float(lam[-1]))
    lam, vec = lam[keep], vec[:, keep]
    proj = vec.T @ x
    return float(0.5 * (lam.size * LOG_2PI + np.sum(np.log(lam)) + np.sum(proj * proj / lam)))


def complete_data_nll(model, states: np.ndarray, observations: np.ndarray) -> float:
    """-log p(x_0..x_T, y_1..y_T) of a graph SSM evaluated term by term."""
    system = model.linear_system()
    n = system.n_state
    total = float(-multivariate_normal(np.zeros(n), system.init_cov).logpdf(states[:, 0]))
    for t in range(1, states.shape[1]):
        eps = states[:, t] - system.transition @ states[:, t - 1]
        total += singular_gaussian_nll(eps, system.process_cov)
        resid = observations[:, t - 1] - system.observation @ states[:, t]
        total += float(-multivariate_normal(np.zeros(system.n_obs), system.obs_cov).logpdf(resid))
    return total


def dense_pinv_quadratic(incidence: np.ndarray, a: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """eps^T (B diag(a) B^T)^+ eps through an eigendecomposition."""
    cov = (incidence * a) @ incidence.T
    lam, vec = np.linalg.eigh(cov)
    keep = lam > 1e-10 * lam[-1]
    inv = (vec[:, keep] / lam[keep]) @ vec[:, keep].T
    return np.einsum("...i,ij,...j->...", eps, inv, eps)
