"""Latent parameters of the community-reciprocity model and the rates they imply."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass
class CrepParams:
    """Out-memberships ``u`` (N x K), in-memberships ``v`` (N x K), affinity ``w`` (K x K)
    and the global reciprocity coefficient ``eta``."""

    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    eta: float

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.w = np.asarray(self.w, dtype=float)
        self.eta = float(self.eta)
        if self.u.ndim != 2 or self.u.shape != self.v.shape:
            raise ValueError("u and v must be N x K matrices of equal shape")
        if self.w.shape != (self.K, self.K):
            raise ValueError("w must be K x K")
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")
        if (self.u < 0).any() or (self.v < 0).any() or (self.w < 0).any():
            raise ValueError("u, v, w must be nonnegative")

    @property
    def N(self) -> int:
        return self.u.shape[0]

    @property
    def K(self) -> int:
        return self.u.shape[1]

    def copy(self) -> "CrepParams":
        return CrepParams(self.u.copy(), self.v.copy(), self.w.copy(), self.eta)

    def with_eta(self, eta: float) -> "CrepParams":
        return replace(self.copy(), eta=eta)

    def permuted(self, perm) -> "CrepParams":
        """Relabel nodes so that new node ``a`` is old node ``perm[a]``."""
        perm = np.asarray(perm)
        return CrepParams(self.u[perm], self.v[perm], self.w.copy(), self.eta)


def lambda0(params: CrepParams, i: int, j: int) -> float:
    """Community rate ``sum_kq u_ik v_jq w_kq`` for the ordered pair (i, j)."""
    return float(params.u[i] @ params.w @ params.v[j])


def lambda0_pairs(params: CrepParams, i, j) -> np.ndarray:
    return np.einsum("ek,kq,eq->e", params.u[i], params.w, params.v[j])


def lambda0_matrix(params: CrepParams) -> np.ndarray:
    """Dense ``N x N`` community rates with the diagonal set to zero."""
    lam = params.u @ params.w @ params.v.T
    np.fill_diagonal(lam, 0.0)
    return lam


def _check_eta(eta: float) -> None:
    if not 0 <= eta < 1:
        raise ValueError(f"marginal mean needs 0 <= eta < 1, got {eta}")


def marginal_mean(params: CrepParams, i: int, j: int) -> float:
    """Expected ``A_ij`` under the joint dyad distribution, ``(l_ij + eta l_ji) / (1 - eta^2)``."""
    _check_eta(params.eta)
    eta = params.eta
    return (lambda0(params, i, j) + eta * lambda0(params, j, i)) / (1.0 - eta**2)


def marginal_mean_matrix(params: CrepParams, lam0: np.ndarray | None = None) -> np.ndarray:
    _check_eta(params.eta)
    if lam0 is None:
        lam0 = lambda0_matrix(params)
    eta = params.eta
    return (lam0 + eta * lam0.T) / (1.0 - eta**2)
