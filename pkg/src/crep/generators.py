"""Samplers for benchmark networks with communities and reciprocity, the Poisson
SBM, and the Holland-Leinhardt reciprocity model."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit, logsumexp

from .graph import DirectedGraph
from .model import CrepParams, lambda0_matrix, marginal_mean, marginal_mean_matrix  # noqa: F401


@dataclass
class PlantedConfig:
    """Planted-partition benchmark recipe.

    ``K`` equal blocks (remainder to the last block) with one-hot memberships;
    a random fraction ``overlap`` of nodes get Dirichlet(``dirichlet_alpha``)
    rows instead. The affinity is assortative with ``p1 = avg_degree K / N`` on
    the diagonal and ``p2 = 0.1 p1`` off it. ``expected_edges`` defaults to
    ``avg_degree * N``.
    """

    N: int = 500
    K: int = 3
    avg_degree: float = 20.0
    eta: float = 0.5
    overlap: float = 0.0
    dirichlet_alpha: float = 0.1
    expected_edges: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.eta < 1:
            raise ValueError("eta must be in [0, 1)")
        if not 0 <= self.overlap <= 1:
            raise ValueError("overlap must be in [0, 1]")
        if self.avg_degree <= 0:
            raise ValueError("avg_degree must be positive")
        if self.K < 1:
            raise ValueError("K must be >= 1")

    @property
    def p1(self) -> float:
        return self.avg_degree * self.K / self.N

    @property
    def p2(self) -> float:
        return 0.1 * self.p1

    @property
    def target_edges(self) -> float:
        return self.expected_edges if self.expected_edges is not None else self.avg_degree * self.N


def block_labels(N: int, K: int) -> np.ndarray:
    size = N // K
    labels = np.minimum(np.arange(N) // max(size, 1), K - 1)
    return labels


def build_planted_params(cfg: PlantedConfig) -> CrepParams:
    if cfg.K > cfg.N:
        raise ValueError("K cannot exceed N")
    rng = np.random.default_rng(cfg.seed)
    labels = block_labels(cfg.N, cfg.K)
    u = np.zeros((cfg.N, cfg.K))
    u[np.arange(cfg.N), labels] = 1.0
    v = u.copy()
    n_over = int(round(cfg.overlap * cfg.N))
    if n_over:
        mixed = np.sort(rng.choice(cfg.N, size=n_over, replace=False))
        alpha = np.full(cfg.K, cfg.dirichlet_alpha)
        u[mixed] = rng.dirichlet(alpha, size=n_over)
        v[mixed] = rng.dirichlet(alpha, size=n_over)
    w = np.full((cfg.K, cfg.K), cfg.p2)
    np.fill_diagonal(w, cfg.p1)
    return CrepParams(u, v, w, cfg.eta)


def sparsity_constant(params: CrepParams, expected_edges: float) -> float:
    """Factor ``c`` such that rates ``c * lambda0`` give ``expected_edges`` in expectation.

    ``c = (1 - eta) E[M] / sum_{i != j} lambda0_ij``.
    """
    total = lambda0_matrix(params).sum()
    if total <= 0:
        raise ValueError("community rates sum to zero; cannot rescale")
    return (1.0 - params.eta) * expected_edges / total


def rescale(params: CrepParams, expected_edges: float) -> CrepParams:
    c = sparsity_constant(params, expected_edges)
    out = params.copy()
    out.w = out.w * c
    return out


def sample_dyads(l_ij, l_ji, eta: float, rng: np.random.Generator, return_order: bool = False):
    """Draw ``(A_ij, A_ji)`` for arrays of dyads.

    A coin flip picks which entry comes first; the first is Poisson with the
    joint-consistent marginal mean, the second Poisson with the conditional
    mean ``lambda0 + eta * first``. With ``return_order`` a boolean array is
    appended that is True where ``A_ij`` was drawn first.
    """
    if not 0 <= eta < 1:
        raise ValueError(f"eta must be in [0, 1), got {eta}")
    l_ij = np.asarray(l_ij, dtype=float)
    l_ji = np.asarray(l_ji, dtype=float)
    m_ij = (l_ij + eta * l_ji) / (1 - eta**2)
    m_ji = (l_ji + eta * l_ij) / (1 - eta**2)
    forward = rng.random(l_ij.shape) < 0.5
    first = rng.poisson(np.where(forward, m_ij, m_ji))
    second = rng.poisson(np.where(forward, l_ji, l_ij) + eta * first)
    a_ij, a_ji = np.where(forward, first, second), np.where(forward, second, first)
    if return_order:
        return a_ij, a_ji, forward
    return a_ij, a_ji


def sample_benchmark(
    params: CrepParams,
    expected_edges: float | None = None,
    seed: int = 0,
    node_labels=None,
) -> DirectedGraph:
    """Sample a network from the community-reciprocity benchmark.

    If ``expected_edges`` is given the affinity is first rescaled by
    :func:`sparsity_constant`. Dyads are visited in row-major ``i < j`` order
    from a single seeded stream.
    """
    if not 0 <= params.eta < 1:
        raise ValueError(f"eta must be in [0, 1), got {params.eta}")
    if expected_edges is not None:
        params = rescale(params, expected_edges)
    lam = lambda0_matrix(params)
    iu, ju = np.triu_indices(params.N, k=1)
    rng = np.random.default_rng(seed)
    a_ij, a_ji = sample_dyads(lam[iu, ju], lam[ju, iu], params.eta, rng)
    src = np.concatenate([iu, ju])
    dst = np.concatenate([ju, iu])
    wts = np.concatenate([a_ij, a_ji])
    return DirectedGraph.from_arrays(params.N, src, dst, wts, node_labels=node_labels)


def sample_sbm(params: CrepParams, expected_edges: float | None = None, seed: int = 0,
               node_labels=None) -> DirectedGraph:
    """Poisson SBM: the benchmark sampler with ``eta`` forced to zero."""
    return sample_benchmark(params.with_eta(0.0), expected_edges, seed, node_labels)


def generate_planted(cfg: PlantedConfig) -> tuple[DirectedGraph, CrepParams]:
    """Planted parameters (rescaled to the target edge count) and one sample."""
    params = rescale(build_planted_params(cfg), cfg.target_edges)
    return sample_benchmark(params, seed=cfg.seed), params


@dataclass(frozen=True)
class HLParams:
    """Holland-Leinhardt dyad model with density ``theta`` and reciprocity ``alpha``.

    Dyad states (null, i->j only, j->i only, mutual) have weights
    ``1, e^-theta, e^-theta, e^(alpha - 2 theta)``.
    """

    theta: float
    alpha: float

    @property
    def log_Z(self) -> float:
        return float(logsumexp([0.0, math.log(2.0) - self.theta, self.alpha - 2 * self.theta]))

    @property
    def Z(self) -> float:
        return math.exp(self.log_Z)

    @property
    def p_null(self) -> float:
        return math.exp(-self.log_Z)

    @property
    def p_single(self) -> float:
        return math.exp(-self.theta - self.log_Z)

    @property
    def p_mutual(self) -> float:
        return math.exp(self.alpha - 2 * self.theta - self.log_Z)

    @property
    def edge_probability(self) -> float:
        """Marginal ``P(A_ij = 1)``."""
        return math.exp(np.logaddexp(-self.theta, self.alpha - 2 * self.theta) - self.log_Z)

    def conditional(self, a_ij) -> np.ndarray:
        """``P(A_ji = 1 | A_ij)``."""
        return expit(-(self.theta - self.alpha * np.asarray(a_ij, dtype=float)))

    @property
    def expected_reciprocity(self) -> float:
        """Fraction of edges that are reciprocated, in the large-N limit."""
        return self.p_mutual / (self.p_mutual + self.p_single)


def sample_hl(n_nodes: int, theta: float, alpha: float, seed: int = 0) -> DirectedGraph:
    """Binary network from the Holland-Leinhardt model, one independent draw per dyad."""
    hl = HLParams(theta, alpha)
    iu, ju = np.triu_indices(n_nodes, k=1)
    rng = np.random.default_rng(seed)
    a = (rng.random(len(iu)) < hl.edge_probability).astype(np.int64)
    b = (rng.random(len(iu)) < hl.conditional(a)).astype(np.int64)
    src = np.concatenate([iu, ju])
    dst = np.concatenate([ju, iu])
    return DirectedGraph.from_arrays(n_nodes, src, dst, np.concatenate([a, b]))


def theta_from_density(p_single_target: float, alpha: float) -> float:
    """Density parameter giving marginal edge probability ``p_single_target`` at ``alpha``."""
    p = p_single_target
    if not 0 < p < 1:
        raise ValueError("target probability must be in (0, 1)")

    def f(theta):
        return HLParams(theta, alpha).edge_probability - p

    lo, hi = -1.0, 1.0
    for _ in range(200):
        if f(lo) > 0:
            break
        lo *= 2
    for _ in range(200):
        if f(hi) < 0:
            break
        hi *= 2
    if not (f(lo) > 0 > f(hi)):
        raise ValueError(f"cannot bracket theta for p={p}, alpha={alpha}")
    return float(brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500))
