"""Pseudo-likelihood EM inference of memberships, affinity and reciprocity.

The E-step computes, for every observed edge, the split ``rho`` between the
community rate and the reciprocity term and the split ``phi`` of the
community rate over community pairs. The M-step updates ``u``, ``v``, ``w``
and ``eta`` in that order, refreshing the E-step quantities after each block.
Only nonzero entries enter the log terms, so one sweep costs ``O(E K^2)``
plus ``O(N K)`` for the rate totals (``O(N^2 K)`` when a fold mask is used).
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.special import xlogy

from .graph import DirectedGraph, FoldMask
from .model import CrepParams, lambda0, lambda0_pairs  # noqa: F401  (re-exported)

logger = logging.getLogger(__name__)

EPS = 1e-12
MODES = ("constrained", "unconstrained", "eta_zero")
UPDATES = ("exact", "closed_form")
# eta_zero keeps the normalized memberships of the default model
_ROW_NORMALIZED = {"constrained", "eta_zero"}


class FitError(RuntimeError):
    """Inference could not produce a finite estimate."""


@dataclass
class EmConfig:
    mode: str = "constrained"
    max_iter: int = 1000
    tol: float = 1e-4
    check_every: int = 10
    patience: int = 3
    restarts: int = 10
    seed: int = 0
    epsilon: float = EPS
    workers: int = 1
    membership_update: str = "exact"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.membership_update not in UPDATES:
            raise ValueError(f"membership_update must be one of {UPDATES}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.check_every < 1 or self.patience < 1:
            raise ValueError("check_every and patience must be >= 1")


@dataclass
class VariationalState:
    """Per-edge E-step quantities, aligned with the stored edges of the graph
    (restricted to the training support when one is given).

    ``phi`` has shape ``(E, K, K)``. It may be left as ``None``, in which case
    it is implied by the parameters through ``lambda0``.
    """

    rho1: np.ndarray
    rho2: np.ndarray
    phi: np.ndarray | None = None
    lambda0: np.ndarray | None = None


@dataclass
class FitResult:
    params: CrepParams
    final_lpl: float
    n_iter: int
    restart_index: int
    lpl_trace: list = field(default_factory=list)
    mode: str = "constrained"


class _Problem:
    """Edge arrays and rate-total helpers for a graph restricted to a pair support."""

    def __init__(self, g: DirectedGraph, support: np.ndarray | None = None):
        self.N = g.n_nodes
        rev = g.reverse_weights()
        if support is None:
            sel = np.ones(g.n_edges, dtype=bool)
            self.support = None
            self.rev_total = float(g.total_weight)
        else:
            support = np.array(support, dtype=bool)
            np.fill_diagonal(support, False)
            sel = support[g.src, g.dst]
            self.support = support.astype(float)
            # sum of A_ji over support pairs (i, j): edge (j, i) counts when (i, j) is kept
            self.rev_total = float(g.weight[support[g.dst, g.src]].sum())
        self.src = g.src[sel]
        self.dst = g.dst[sel]
        self.A = g.weight[sel].astype(float)
        self.A_rev = rev[sel].astype(float)
        E = len(self.src)
        cols = np.arange(E)
        self.out_inc = sparse.csr_matrix((np.ones(E), (self.src, cols)), shape=(self.N, E))
        self.in_inc = sparse.csr_matrix((np.ones(E), (self.dst, cols)), shape=(self.N, E))

    @property
    def total(self) -> float:
        return float(self.A.sum())

    def lambda0(self, p: CrepParams) -> np.ndarray:
        return _rowdot(p.u.take(self.src, axis=0) @ p.w, p.v.take(self.dst, axis=0))

    def pair_mass(self, u, v) -> np.ndarray:
        """``sum_{(i,j) in support} u_ik v_jq`` as a K x K matrix."""
        if self.support is None:
            return np.outer(u.sum(0), v.sum(0)) - u.T @ v
        return u.T @ (self.support @ v)

    def out_norm(self, v, w) -> np.ndarray:
        """``sum_{j: (i,j) in support} sum_q v_jq w_kq`` as an N x K matrix."""
        vw = v @ w.T
        if self.support is None:
            return vw.sum(0) - vw
        return self.support @ vw

    def in_norm(self, u, w) -> np.ndarray:
        uw = u @ w
        if self.support is None:
            return uw.sum(0) - uw
        return self.support.T @ uw

    def rate_total(self, p: CrepParams) -> float:
        return float((p.w * self.pair_mass(p.u, p.v)).sum() + p.eta * self.rev_total)


def _rowdot(a, b):
    # (a * b).sum(1) is slow for narrow rows; a small matvec is not
    return (a * b) @ np.ones(a.shape[1])


def _support(mask: FoldMask | None, train_folds) -> np.ndarray | None:
    if mask is None:
        return None
    if train_folds is None:
        raise ValueError("train_folds is required together with a mask")
    return mask.support(train_folds)


def _problem(g, support):
    return g if isinstance(g, _Problem) else _Problem(g, support)


def _log_pl(p: CrepParams, prob: _Problem, eps: float) -> float:
    lam = prob.lambda0(p) + p.eta * prob.A_rev
    return float(prob.A @ np.log(np.maximum(lam, eps)) - prob.rate_total(p))


def log_pseudo_likelihood(
    params: CrepParams, g: DirectedGraph, support=None, epsilon: float = EPS
) -> float:
    """``sum_ij A_ij log(lambda_ij) - lambda_ij`` over ordered non-diagonal pairs.

    With ``support`` (boolean N x N) only the selected pairs contribute.
    """
    return _log_pl(params, _problem(g, support), epsilon)


def _state(p: CrepParams, prob: _Problem, eps: float, with_phi: bool) -> VariationalState:
    l0 = prob.lambda0(p)
    rec = p.eta * prob.A_rev
    tot = l0 + rec
    ok = tot >= eps
    safe = np.where(ok, tot, 1.0)
    rho1 = np.where(ok, l0 / safe, 1.0)
    rho2 = np.where(ok, rec / safe, 0.0)
    phi = None
    if with_phi:
        K = p.K
        phi = p.u[prob.src][:, :, None] * p.v[prob.dst][:, None, :] * p.w[None]
        good = l0 >= eps
        phi[good] /= l0[good, None, None]
        phi[~good] = 1.0 / K**2
    return VariationalState(rho1=rho1, rho2=rho2, phi=phi, lambda0=l0)


def e_step(
    params: CrepParams, g: DirectedGraph, support=None, epsilon: float = EPS
) -> VariationalState:
    """Tight variational distributions for the current parameters.

    ``rho1 = l0 / (l0 + eta A_ji)`` and ``phi_kq = u_ik v_jq w_kq / l0`` on every
    observed edge. Where ``l0 + eta A_ji`` falls below ``epsilon`` the split
    defaults to ``rho1 = 1``; where ``l0`` does, ``phi`` is uniform.
    """
    return _state(params, _problem(g, support), epsilon, with_phi=True)


def _edge_counts(p: CrepParams, prob: _Problem, state: VariationalState | None, which: str,
                 eps: float):
    """Marginals of ``A rho1 phi`` per edge: over q ('out'), over k ('in') or summed
    over edges ('pair').

    Uses the materialized ``state.phi`` when present; otherwise the tight E-step
    quantities are implied by ``p`` and never stored: ``A rho1 phi_kq`` is
    ``A / lambda * u_ik v_jq w_kq``.
    """
    if state is not None and state.phi is not None:
        q = (prob.A * state.rho1)[:, None, None] * state.phi
        return {"out": lambda: q.sum(2), "in": lambda: q.sum(1), "pair": lambda: q.sum(0)}[which]()

    us, vs = p.u.take(prob.src, axis=0), p.v.take(prob.dst, axis=0)
    if which == "out":
        side = vs @ p.w.T
        l0 = _rowdot(us, side)
    else:
        side = us @ p.w
        l0 = _rowdot(vs, side)
    lam = l0 + p.eta * prob.A_rev
    good = l0 >= eps
    if good.all():
        coef = prob.A / lam
    else:
        coef = np.where(good, prob.A / np.where(good, lam, 1.0), 0.0)
    if which == "out":
        res = (coef[:, None] * us) * side
    elif which == "in":
        res = (coef[:, None] * vs) * side
    else:
        res = p.w * ((coef[:, None] * us).T @ vs)
    if good.all():
        return res
    # phi is uniform where l0 vanishes
    K = p.K
    ok = lam >= eps
    rho1 = np.where(ok, l0 / np.where(ok, lam, 1.0), 1.0)
    spill = np.where(good, 0.0, prob.A * rho1)
    if which == "pair":
        return res + spill.sum() / K**2
    return res + spill[:, None] / K


def _divide(num, den, eps):
    ok = den >= eps
    return np.where(ok, num / np.where(ok, den, 1.0), 0.0)


def _simplex_solve(num, cost, eps, max_iter=100):
    """Maximize ``sum_k num_k log x_k - cost_k x_k`` over each row's simplex.

    The solution is ``x_k = num_k / (cost_k + gamma)`` with the multiplier
    ``gamma`` making the row sum to one. With ``s = gamma + min_k cost_k`` and
    ``T(s) = sum_k num_k / (gap_k + s)``, we solve ``1 / T(s) = 1``: ``1 / T``
    is increasing and concave (linear when all costs tie), so Newton started
    where ``T >= 1`` climbs monotonically to the root in a few steps. The start
    ``s = max_k (num_k - gap_k)`` makes one term equal to one and none larger.
    Entries with ``num_k`` below ``tiny`` are treated as zero.
    """
    tiny = 1e-290
    active = num > tiny
    rows = active.any(axis=1)
    out = np.zeros_like(num)
    if not rows.any():
        return out
    n = np.where(active[rows], num[rows], 0.0)
    c = np.where(active[rows], cost[rows], np.inf)
    cmin = c.min(axis=1, keepdims=True)
    gap = np.where(active[rows], c - cmin, np.inf)
    s = np.max(np.where(active[rows], n - gap, 0.0), axis=1)
    ones = np.ones(n.shape[1])
    for _ in range(max_iter):
        d = gap + s[:, None]
        t = n / d
        T = t @ ones
        step = T * (T - 1.0) / ((t / d) @ ones)
        s = s + step
        if np.all(np.abs(step) <= 1e-14 * s):
            break
    x = n / (gap + s[:, None])
    x /= x.sum(axis=1, keepdims=True)
    out[rows] = x
    return out


def _memberships(p, prob, state, side, mode, eps, update="exact"):
    if side == "out":
        num = prob.out_inc @ _edge_counts(p, prob, state, "out", eps)
    elif side == "in":
        num = prob.in_inc @ _edge_counts(p, prob, state, "in", eps)
    else:
        raise ValueError("side must be 'out' or 'in'")
    if mode in _ROW_NORMALIZED and update == "closed_form":
        # multiplier approximated by the row total sum_j A_ij rho1_ij
        gamma = num.sum(axis=1, keepdims=True)
        return _divide(num, gamma, eps)
    den = prob.out_norm(p.v, p.w) if side == "out" else prob.in_norm(p.u, p.w)
    if mode in _ROW_NORMALIZED:
        return _simplex_solve(num, den, eps)
    return _divide(num, den, eps)


def m_step_memberships(
    params: CrepParams,
    state: VariationalState,
    g: DirectedGraph,
    side: str = "out",
    mode: str = "constrained",
    support=None,
    epsilon: float = EPS,
    update: str = "exact",
) -> np.ndarray:
    """Updated ``u`` (``side='out'``) or ``v`` (``side='in'``).

    With ``n_ik = sum_{j,q} A_ij rho1_ij phi_ijkq`` and
    ``c_ik = sum_{j != i} sum_q v_jq w_kq``:

    * unconstrained: ``u_ik = n_ik / c_ik``;
    * constrained / eta_zero, ``update='exact'``: ``u_ik = n_ik / (c_ik + gamma_i)``
      with ``gamma_i`` the Lagrange multiplier of ``sum_k u_ik = 1``;
    * constrained / eta_zero, ``update='closed_form'``: ``u_ik = n_ik / sum_k n_ik``,
      which takes ``gamma_i = sum_j A_ij rho1_ij`` and ignores ``c_ik``. Cheaper,
      but not guaranteed to increase the objective.

    Rows with no positive ``n_ik`` are set to zero.
    """
    return _memberships(params, _problem(g, support), state, side, mode, epsilon, update)


def _affinity(p, prob, state, eps):
    num = _edge_counts(p, prob, state, "pair", eps)
    return _divide(num, prob.pair_mass(p.u, p.v), eps)


def m_step_affinity(
    params: CrepParams, state: VariationalState, g: DirectedGraph, support=None,
    epsilon: float = EPS,
) -> np.ndarray:
    """``w_kq = sum_ij A_ij rho1_ij phi_ijkq / sum_{i != j} u_ik v_jq``."""
    return _affinity(params, _problem(g, support), state, epsilon)


def _eta(p, prob, eps):
    if prob.total <= 0:
        raise FitError("no observed weight to estimate eta from")
    if prob.rev_total <= 0:
        return 0.0
    lam = np.maximum(prob.lambda0(p) + p.eta * prob.A_rev, eps)
    return float(p.eta * (prob.A @ (prob.A_rev / lam)) / prob.rev_total)


def m_step_eta(params: CrepParams, g: DirectedGraph, support=None, epsilon: float = EPS) -> float:
    """Fixed-point update ``eta * sum_ij A_ij A_ji / lambda_ij / sum_ij A_ji``.

    Without a support restriction the denominator is the total weight ``M``.
    """
    return _eta(params, _problem(g, support), epsilon)


def variational_objective(
    params: CrepParams, state: VariationalState, g: DirectedGraph, support=None,
    epsilon: float = EPS,
) -> float:
    """Jensen lower bound on the log-pseudo-likelihood for arbitrary ``rho``, ``phi``."""
    prob = _problem(g, support)
    p = params
    phi = state.phi
    if phi is None:
        phi = _state(p, prob, epsilon, with_phi=True).phi
    uvw = p.u[prob.src][:, :, None] * p.v[prob.dst][:, None, :] * p.w[None]
    comm = (xlogy(phi, uvw) - xlogy(phi, phi)).sum(axis=(1, 2))
    r1, r2 = state.rho1, state.rho2
    per_edge = (
        r1 * comm
        + xlogy(r2, p.eta * prob.A_rev)
        - xlogy(r1, r1)
        - xlogy(r2, r2)
    )
    return float(prob.A @ per_edge - prob.rate_total(p))


def random_init(N: int, K: int, mode: str, rng: np.random.Generator) -> CrepParams:
    u = rng.random((N, K))
    v = rng.random((N, K))
    w = rng.random((K, K))
    eta = rng.uniform(0.05, 0.95)
    if mode in _ROW_NORMALIZED:
        u /= u.sum(axis=1, keepdims=True)
        v /= v.sum(axis=1, keepdims=True)
    if mode == "eta_zero":
        eta = 0.0
    return CrepParams(u, v, w, eta)


def em_iteration(
    p: CrepParams, prob: _Problem, mode: str, eps: float = EPS, update: str = "exact"
) -> CrepParams:
    """One sweep: u, v, w, then eta, with the E-step refreshed before each block."""
    p = p.copy()
    p.u = _memberships(p, prob, None, "out", mode, eps, update)
    p.v = _memberships(p, prob, None, "in", mode, eps, update)
    p.w = _affinity(p, prob, None, eps)
    if mode != "eta_zero":
        p.eta = _eta(p, prob, eps)
    return p


def _run(prob: _Problem, K: int, cfg: EmConfig, restart: int, init: CrepParams | None):
    eps = cfg.epsilon
    p = init.copy() if init is not None else random_init(
        prob.N, K, cfg.mode, np.random.default_rng(cfg.seed + restart)
    )
    if cfg.mode == "eta_zero":
        p.eta = 0.0
    prev = _log_pl(p, prob, eps)
    trace = [prev]
    passes = 0
    it = 0
    for it in range(1, cfg.max_iter + 1):
        p = em_iteration(p, prob, cfg.mode, eps, cfg.membership_update)
        if it % cfg.check_every == 0 or it == cfg.max_iter:
            cur = _log_pl(p, prob, eps)
            trace.append(cur)
            if not math.isfinite(cur):
                break
            passes = passes + 1 if abs(cur - prev) < cfg.tol else 0
            prev = cur
            if passes >= cfg.patience:
                break
    final = _log_pl(p, prob, eps)
    return FitResult(p, final, it, restart, trace, cfg.mode)


def _run_job(args):
    return _run(*args)


def fit(
    g: DirectedGraph,
    K: int,
    cfg: EmConfig | None = None,
    mask: FoldMask | None = None,
    train_folds=None,
    init: CrepParams | None = None,
    support: np.ndarray | None = None,
) -> FitResult:
    """Fit the model by EM from ``cfg.restarts`` random starts and keep the best.

    Parameters
    ----------
    g : DirectedGraph
        Observed network.
    K : int
        Number of communities.
    cfg : EmConfig, optional
        Mode, convergence rule, restarts and seed. Restart ``r`` is seeded with
        ``cfg.seed + r``.
    mask, train_folds : FoldMask, sequence of int, optional
        Fit only on the ordered pairs of the given folds. Reciprocal weights
        ``A_ji`` are still read from the full graph. ``support`` may be passed
        instead as a boolean N x N matrix.
    init : CrepParams, optional
        Explicit starting point; a single run is performed from it.

    Returns
    -------
    FitResult
        The run with the highest final log-pseudo-likelihood.
    """
    cfg = cfg or EmConfig()
    if K < 1:
        raise ValueError("K must be >= 1")
    if mask is not None:
        support = _support(mask, train_folds)
    prob = _Problem(g, support)
    if prob.total <= 0:
        raise FitError("graph has no observed weight on the fitted pairs")
    if init is not None:
        if init.u.shape != (g.n_nodes, K):
            raise ValueError("init has the wrong shape")
        jobs = [(prob, K, cfg, 0, init)]
    else:
        jobs = [(prob, K, cfg, r, None) for r in range(cfg.restarts)]

    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            results = list(ex.map(_run_job, jobs))
    else:
        results = [_run_job(j) for j in jobs]

    best = None
    for res in results:
        if not math.isfinite(res.final_lpl):
            logger.warning("restart %d ended with non-finite log-pseudo-likelihood; discarded",
                           res.restart_index)
            continue
        if best is None or res.final_lpl > best.final_lpl:
            best = res
    if best is None:
        raise FitError("every restart produced a non-finite log-pseudo-likelihood")
    return best
