"""Reciprocity statistics, edge scores and AUC, and community-recovery similarity."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.stats import rankdata

from .graph import DirectedGraph
from .model import CrepParams, lambda0_matrix, lambda0_pairs, marginal_mean_matrix


class AUCError(ValueError):
    """The held-out set lacks positives or negatives."""


def _mutual_mask(g: DirectedGraph) -> np.ndarray:
    return g.reverse_weights() > 0


def reciprocity(g: DirectedGraph) -> float:
    """Fraction of (binarized) directed edges whose reverse edge is also present."""
    if g.n_edges == 0:
        raise ValueError("reciprocity is undefined for a graph without edges")
    return float(_mutual_mask(g).sum() / g.n_edges)


def weighted_reciprocity(g: DirectedGraph) -> float:
    """``sum_ij A_ij A_ji / sum_ij A_ij``."""
    M = g.total_weight
    if M == 0:
        raise ValueError("weighted reciprocity is undefined when total weight is zero")
    return float(np.dot(g.weight, g.reverse_weights()) / M)


def expected_weighted_reciprocity(params: CrepParams, bernoulli: bool = False) -> float:
    """Model expectation of the weighted reciprocity.

    Uses ``E[A_ij A_ji] = lambda0_ij m_ji + eta E[A_ji^2]`` with the Poisson
    second moment ``m + m^2`` (or ``m`` for 0/1 entries when ``bernoulli``),
    divided by ``sum m``. The result is never below ``eta``.
    """
    lam0 = lambda0_matrix(params)
    m = marginal_mean_matrix(params, lam0)
    total = m.sum()
    if not total > 0:
        raise ValueError("expected total weight is zero")
    eta = params.eta
    if eta == 0:
        return float((m * m.T).sum() / total)
    if bernoulli:
        extra = (lam0 * m.T).sum()
    else:
        extra = (lam0 * m.T).sum() + eta * (m.T**2).sum()
    return float(eta + extra / total)


def cr_ratio(params: CrepParams) -> float:
    """Expected share of edge weight generated by communities alone, ``1 - eta``.

    Equal to ``sum lambda0 / E[M]`` under the benchmark ensemble.
    """
    if not 0 <= params.eta < 1:
        raise ValueError(f"cr_ratio needs 0 <= eta < 1, got {params.eta}")
    return 1.0 - params.eta


@dataclass(frozen=True)
class EdgeDecomposition:
    """Community share ``cr_ij = lambda0_ij / m_ij`` of each direction and their difference."""

    cr_ij: np.ndarray | float
    cr_ji: np.ndarray | float
    d_ij: np.ndarray | float


def edge_decomposition(params: CrepParams, i, j) -> EdgeDecomposition:
    """Per-pair decomposition; ``i`` and ``j`` may be scalars or aligned arrays."""
    if not 0 <= params.eta < 1:
        raise ValueError(f"decomposition needs 0 <= eta < 1, got {params.eta}")
    scalar = np.isscalar(i) and np.isscalar(j)
    i = np.atleast_1d(np.asarray(i, dtype=np.int64))
    j = np.atleast_1d(np.asarray(j, dtype=np.int64))
    l_ij = lambda0_pairs(params, i, j)
    l_ji = lambda0_pairs(params, j, i)
    eta = params.eta
    m_ij = (l_ij + eta * l_ji) / (1 - eta**2)
    m_ji = (l_ji + eta * l_ij) / (1 - eta**2)
    if np.any(m_ij <= 0) or np.any(m_ji <= 0):
        raise ValueError("marginal mean is zero for a requested pair")
    cr_ij = l_ij / m_ij
    cr_ji = l_ji / m_ji
    d = cr_ij - cr_ji
    if scalar:
        return EdgeDecomposition(float(cr_ij[0]), float(cr_ji[0]), float(d[0]))
    return EdgeDecomposition(cr_ij, cr_ji, d)


@dataclass
class ScoredPairs:
    """Aligned arrays of held-out pairs, their observed weight and a model score."""

    i: np.ndarray
    j: np.ndarray
    truth: np.ndarray
    score: np.ndarray

    def __len__(self):
        return len(self.i)


SCORE_KINDS = ("regular", "conditional")


def score_pairs(params: CrepParams, g: DirectedGraph, pairs, kind: str = "regular") -> ScoredPairs:
    """Score ordered pairs.

    ``regular`` uses the marginal mean ``m_ij``; ``conditional`` uses
    ``lambda0_ij + eta A_ji`` with ``A_ji`` read from the full graph ``g``.
    """
    if kind not in SCORE_KINDS:
        raise ValueError(f"kind must be one of {SCORE_KINDS}")
    i, j = (np.asarray(a, dtype=np.int64) for a in pairs)
    l_ij = lambda0_pairs(params, i, j)
    if kind == "regular":
        if not 0 <= params.eta < 1:
            raise ValueError(f"regular scores need 0 <= eta < 1, got {params.eta}")
        eta = params.eta
        score = (l_ij + eta * lambda0_pairs(params, j, i)) / (1 - eta**2)
    else:
        score = l_ij + params.eta * g.lookup(j, i)
    return ScoredPairs(i, j, g.lookup(i, j), score)


def auc(scored: ScoredPairs, fold=None) -> float:
    """Exact ROC AUC of ``score`` against ``truth > 0`` with half credit for ties."""
    pos = np.asarray(scored.truth) > 0
    n_pos = int(pos.sum())
    n_neg = len(pos) - n_pos
    if n_pos == 0 or n_neg == 0:
        where = f" in fold {fold}" if fold is not None else ""
        kind = "positive" if n_pos == 0 else "negative"
        raise AUCError(f"no {kind} pairs{where}; AUC undefined")
    ranks = rankdata(scored.score)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def _check_shapes(truth, inferred):
    truth = np.asarray(truth, dtype=float)
    inferred = np.asarray(inferred, dtype=float)
    if truth.ndim != 2 or truth.shape != inferred.shape:
        raise ValueError(f"membership shapes differ: {truth.shape} vs {inferred.shape}")
    return truth, inferred


def _unit_rows(x):
    norm = np.linalg.norm(x, axis=1, keepdims=True)
    return np.divide(x, norm, out=np.zeros_like(x), where=norm > 0)


def align_columns(truth, inferred) -> np.ndarray:
    """Column permutation of ``inferred`` that maximizes the summed row cosine."""
    truth, inferred = _check_shapes(truth, inferred)
    # row norms do not change under column permutation, so the objective is linear
    gain = _unit_rows(truth).T @ _unit_rows(inferred)
    _, perm = linear_sum_assignment(gain, maximize=True)
    return perm


def cosine_similarity(truth, inferred) -> float:
    """Mean row cosine between memberships after the best column alignment.

    Rows are compared as they are; zero rows contribute 0.
    """
    truth, inferred = _check_shapes(truth, inferred)
    perm = align_columns(truth, inferred)
    cos = (_unit_rows(truth) * _unit_rows(inferred[:, perm])).sum(1)
    return float(cos.mean())


def hard_labels(x) -> np.ndarray:
    """Per-row argmax; ties go to the lowest index."""
    return np.argmax(np.asarray(x), axis=1)


def f1_hard(truth, inferred) -> float:
    """Mean per-community F1 of argmax partitions under the best label matching.

    A community that is empty in both partitions scores 1.
    """
    truth, inferred = _check_shapes(truth, inferred)
    K = truth.shape[1]
    t = np.eye(K)[hard_labels(truth)]
    x = np.eye(K)[hard_labels(inferred)]
    overlap = t.T @ x
    sizes = t.sum(0)[:, None] + x.sum(0)[None, :]
    f1 = np.where(sizes > 0, 2 * overlap / np.where(sizes > 0, sizes, 1), 1.0)
    rows, cols = linear_sum_assignment(f1, maximize=True)
    return float(f1[rows, cols].mean())


def dirichlet_baseline(N: int, K: int, alpha: float = 0.1, seed: int = 0) -> np.ndarray:
    """Random memberships with rows drawn from a symmetric Dirichlet."""
    rng = np.random.default_rng(seed)
    return rng.dirichlet(np.full(K, alpha), size=N)


@dataclass(frozen=True)
class MetricRecord:
    name: str
    value: float
    provenance: str = ""


def format_records(records) -> str:
    """Flat ``name=value`` lines, six significant digits."""
    return "".join(f"{r.name}={r.value:.6g}\n" for r in records)


def records_json(records) -> str:
    return json.dumps([asdict(r) for r in records], sort_keys=True, indent=2) + "\n"


def graph_records(g: DirectedGraph, source: str = "observed") -> list[MetricRecord]:
    recs = [
        MetricRecord("total_weight", float(g.total_weight), source),
        MetricRecord("n_edges", float(g.n_edges), source),
        MetricRecord("avg_degree", g.total_weight / g.n_nodes, source),
    ]
    if g.n_edges:
        recs += [
            MetricRecord("reciprocity", reciprocity(g), source),
            MetricRecord("weighted_reciprocity", weighted_reciprocity(g), source),
        ]
    return recs
