"""Pseudo-inverse machinery for edge-driven covariances Q = B diag(a) B^T.

Q is rank n-1 on a connected graph. Two precomputed views are provided:

* :class:`IncidencePseudoInverse` evaluates the precision quadratic form
  eps^T Q^+ eps as the minimum-energy edge flow ``min {sum f_e^2 / a_e : B f = eps}``.
  A particular flow comes from the left pseudo-inverse of B, the cycle-space
  correction is a small solve in null(B) (empty on trees), and Q^+ eps is read
  back through the right pseudo-inverse.
* :class:`ReducedIncidence` works in an orthonormal basis of range(B) and gives
  log-pseudo-determinants and dense pseudo-inverses for the likelihood code.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from ..core.models import Operator
from .graph import Graph


@dataclass(frozen=True)
class IncidencePseudoInverse:
    incidence: np.ndarray
    left_pinv: np.ndarray
    right_pinv: np.ndarray
    cycle_basis: np.ndarray

    @property
    def n(self) -> int:
        return self.incidence.shape[0]

    @property
    def m(self) -> int:
        return self.incidence.shape[1]

    def edge_flow(self, eps: np.ndarray, a: np.ndarray) -> np.ndarray:
        """Minimum-energy flows for ``eps`` (..., n) under edge conductances ``a`` (..., m)."""
        eps = np.asarray(eps, dtype=float)
        a = np.broadcast_to(np.asarray(a, dtype=float), eps.shape[:-1] + (self.m,))
        flow = eps @ self.left_pinv.T
        if self.cycle_basis.shape[1] == 0:
            return flow
        cyc = self.cycle_basis
        inv_a = 1.0 / a
        # (N^T D^-1 N) z = N^T D^-1 f0
        gram = np.einsum("ec,...e,ed->...cd", cyc, inv_a, cyc)
        rhs = np.einsum("ec,...e->...c", cyc, inv_a * flow)
        z = np.linalg.solve(gram, rhs[..., None])[..., 0]
        return flow - z @ cyc.T

    def quadratic_form(self, eps: np.ndarray, a: np.ndarray) -> np.ndarray:
        """eps^T Q(a)^+ eps with eps projected on range(B)."""
        flow = self.edge_flow(eps, a)
        return np.sum(flow * flow / a, axis=-1)

    def precision_apply(self, eps: np.ndarray, a: np.ndarray) -> np.ndarray:
        """Q(a)^+ eps."""
        flow = self.edge_flow(eps, a)
        return (flow / a) @ self.right_pinv

    def pinv(self, a: np.ndarray) -> np.ndarray:
        """Dense Q(a)^+ (n x n)."""
        return self.precision_apply(np.eye(self.n), np.asarray(a, dtype=float)).T

    def covariance(self, a: np.ndarray) -> np.ndarray:
        return (self.incidence * np.asarray(a, dtype=float)) @ self.incidence.T


def _dense_incidence(g: Graph, operator: Operator | str) -> np.ndarray:
    g.require_connected()
    return g.operator_incidence(operator).toarray()


def incidence_pseudoinverses(
    g: Graph, operator: Operator | str = Operator.LAPLACIAN
) -> IncidencePseudoInverse:
    """Precompute left/right pseudo-inverses of the incidence and a cycle-space basis.

    ``left_pinv = (B^T B)^+ B^T`` and ``right_pinv = B^T (B B^T)^+``; both are m x n
    and equal B^+ up to rounding.
    """
    b = _dense_incidence(g, operator)
    left = sla.pinvh(b.T @ b) @ b.T
    right = b.T @ sla.pinvh(b @ b.T)
    cycles = sla.null_space(b) if b.shape[1] else np.zeros((0, 0))
    return IncidencePseudoInverse(incidence=b, left_pinv=left, right_pinv=right, cycle_basis=cycles)


@dataclass(frozen=True)
class ReducedIncidence:
    """Incidence expressed in an orthonormal basis U of range(B): C = U^T B."""

    basis: np.ndarray
    reduced: np.ndarray

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    def reduced_covariance(self, a: np.ndarray) -> np.ndarray:
        return (self.reduced * np.asarray(a, dtype=float)) @ self.reduced.T

    def log_pdet(self, a: np.ndarray) -> float:
        """log of the product of nonzero eigenvalues of B diag(a) B^T."""
        chol = sla.cho_factor(self.reduced_covariance(a), lower=True)
        return float(2.0 * np.sum(np.log(np.diag(chol[0]))))

    def reduced_pinv(self, a: np.ndarray) -> np.ndarray:
        cov = self.reduced_covariance(a)
        return sla.cho_solve(sla.cho_factor(cov, lower=True), np.eye(cov.shape[0]))

    def pinv(self, a: np.ndarray) -> np.ndarray:
        return self.basis @ self.reduced_pinv(a) @ self.basis.T

    def project(self, x: np.ndarray) -> np.ndarray:
        """Orthogonal projection of x (n,) or (n, k) onto range(B)."""
        return self.basis @ (self.basis.T @ x)


def reduced_incidence(g: Graph, operator: Operator | str = Operator.LAPLACIAN) -> ReducedIncidence:
    b = _dense_incidence(g, operator)
    basis = sla.orth(b)
    return ReducedIncidence(basis=basis, reduced=basis.T @ b)
