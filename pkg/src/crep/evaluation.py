"""Cross-validated edge prediction, K selection and fit-then-sample recovery reports."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .generators import PlantedConfig, generate_planted, rescale, sample_benchmark
from .graph import DirectedGraph, make_folds
from .inference import EmConfig, fit
from .metrics import (
    AUCError,
    auc,
    cosine_similarity,
    dirichlet_baseline,
    expected_weighted_reciprocity,
    f1_hard,
    reciprocity,
    score_pairs,
    weighted_reciprocity,
)

logger = logging.getLogger(__name__)


def _mean_sd(values) -> tuple[float, float]:
    a = np.asarray(values, dtype=float)
    if a.size == 0:
        return float("nan"), float("nan")
    return float(a.mean()), float(a.std())


@dataclass
class FoldResult:
    K: int
    fold: int
    valid: bool
    regular_auc: float | None
    conditional_auc: float | None
    eta: float
    final_lpl: float
    note: str = ""


@dataclass
class CvSummary:
    K: int
    n_valid: int
    regular_mean: float
    regular_sd: float
    conditional_mean: float
    conditional_sd: float
    eta_mean: float


@dataclass
class CvReport:
    """Per-(K, fold) AUCs and fitted eta, with per-K means and SDs over valid folds."""

    folds: list[FoldResult]
    summaries: list[CvSummary]
    best_k: int
    fold_count: int
    fold_seed: int
    config: dict = field(default_factory=dict)

    def summary(self, K: int) -> CvSummary:
        for s in self.summaries:
            if s.K == K:
                return s
        raise KeyError(K)

    def to_dict(self) -> dict:
        return {
            "best_k": self.best_k,
            "fold_count": self.fold_count,
            "fold_seed": self.fold_seed,
            "config": self.config,
            "folds": [asdict(f) for f in self.folds],
            "summaries": [asdict(s) for s in self.summaries],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def table(self) -> str:
        lines = [f"{'K':>3} {'fold':>4} {'regular':>9} {'conditional':>11} {'eta':>9}"]
        for f in self.folds:
            reg = f"{f.regular_auc:.6g}" if f.valid else "invalid"
            cond = f"{f.conditional_auc:.6g}" if f.valid else "invalid"
            lines.append(f"{f.K:>3} {f.fold:>4} {reg:>9} {cond:>11} {f.eta:>9.6g}")
        lines.append("")
        lines.append(f"{'K':>3} {'regular AUC':>21} {'conditional AUC':>21}")
        for s in self.summaries:
            lines.append(
                f"{s.K:>3} {s.regular_mean:>10.6g} ± {s.regular_sd:<8.3g}"
                f" {s.conditional_mean:>10.6g} ± {s.conditional_sd:<8.3g}"
            )
        lines.append(f"best K = {self.best_k}")
        return "\n".join(lines) + "\n"


def _cv_cell(args):
    g, K, cfg, mask, fold = args
    res = fit(g, K, cfg, support=mask.train_support(fold))
    test = mask.test_pairs(fold)
    out = {}
    try:
        for kind in ("regular", "conditional"):
            out[kind] = auc(score_pairs(res.params, g, test, kind), fold=fold)
    except AUCError as exc:
        return FoldResult(K, fold, False, None, None, res.params.eta, res.final_lpl, str(exc))
    return FoldResult(K, fold, True, out["regular"], out["conditional"], res.params.eta,
                      res.final_lpl)


def cross_validate(
    g: DirectedGraph,
    K_grid,
    cfg: EmConfig | None = None,
    fold_count: int = 5,
    seed: int = 0,
    workers: int = 1,
) -> CvReport:
    """k-fold edge prediction over all ordered pairs, for each K in ``K_grid``.

    Each fold is held out in turn, the model is fitted on the rest and the
    held-out pairs are scored with the regular and conditional scores. Folds
    without positives or negatives are reported invalid and skipped in the
    means. The best K maximizes the mean regular AUC (smallest K on ties).
    """
    K_grid = [int(k) for k in K_grid]
    if not K_grid:
        raise ValueError("K_grid must not be empty")
    cfg = cfg or EmConfig()
    mask = make_folds(g, fold_count, seed)
    inner = replace(cfg, workers=1) if workers > 1 else cfg
    jobs = [(g, K, inner, mask, f) for K in K_grid for f in range(fold_count)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            cells = list(ex.map(_cv_cell, jobs))
    else:
        cells = [_cv_cell(j) for j in jobs]
    cells.sort(key=lambda c: (K_grid.index(c.K), c.fold))

    summaries = []
    for K in K_grid:
        mine = [c for c in cells if c.K == K]
        for c in mine:
            if not c.valid:
                logger.warning("K=%d fold %d excluded: %s", K, c.fold, c.note)
        ok = [c for c in mine if c.valid]
        rm, rs = _mean_sd([c.regular_auc for c in ok])
        cm, cs = _mean_sd([c.conditional_auc for c in ok])
        summaries.append(CvSummary(K, len(ok), rm, rs, cm, cs,
                                   float(np.mean([c.eta for c in mine]))))
    scored = [s for s in summaries if s.n_valid > 0]
    if not scored:
        raise AUCError("no valid fold for any K")
    best = max(scored, key=lambda s: (s.regular_mean, -s.K)).K
    config = {"em": asdict(cfg), "k_grid": K_grid, "fold_count": fold_count, "fold_seed": seed}
    return CvReport(cells, summaries, best, fold_count, seed, config)


@dataclass
class RealizationSummary:
    """Spread across independent networks, kept apart from the spread across folds."""

    K: int
    n_realizations: int
    regular_mean: float
    regular_sd_realizations: float
    regular_sd_folds: float
    conditional_mean: float
    conditional_sd_realizations: float
    conditional_sd_folds: float


def aggregate_realizations(reports: list[CvReport]) -> list[RealizationSummary]:
    """Combine CV reports from independent networks.

    The realization SD is the SD of per-network fold means; the fold SD is the
    average within-network fold SD.
    """
    if not reports:
        raise ValueError("need at least one report")
    out = []
    for K in [s.K for s in reports[0].summaries]:
        sums = [r.summary(K) for r in reports]
        rm, rs = _mean_sd([s.regular_mean for s in sums])
        cm, cs = _mean_sd([s.conditional_mean for s in sums])
        out.append(RealizationSummary(
            K, len(sums), rm, rs, float(np.mean([s.regular_sd for s in sums])),
            cm, cs, float(np.mean([s.conditional_sd for s in sums])),
        ))
    return out


@dataclass
class RecoveryReport:
    """Observed statistics next to those of networks sampled from the fitted model."""

    input_stats: dict
    sample_reciprocity: list[float]
    sample_weighted_reciprocity: list[float]
    sample_total_weight: list[int]
    eta_hat: float
    expected_weighted_reciprocity: float
    final_lpl: float
    seeds: list[int]
    config: dict = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return len(self.seeds)

    def stats(self) -> dict:
        r_m, r_s = _mean_sd(self.sample_reciprocity)
        w_m, w_s = _mean_sd(self.sample_weighted_reciprocity)
        m_m, m_s = _mean_sd(self.sample_total_weight)
        return {
            "reciprocity_mean": r_m, "reciprocity_sd": r_s,
            "weighted_reciprocity_mean": w_m, "weighted_reciprocity_sd": w_s,
            "total_weight_mean": m_m, "total_weight_sd": m_s,
        }

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sample_stats"] = self.stats()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def table(self) -> str:
        s = self.stats()
        inp = self.input_stats
        return (
            f"{'statistic':<22} {'observed':>10} {'samples':>22}\n"
            f"{'reciprocity':<22} {inp['reciprocity']:>10.6g} "
            f"{s['reciprocity_mean']:>10.6g} ± {s['reciprocity_sd']:<9.3g}\n"
            f"{'weighted reciprocity':<22} {inp['weighted_reciprocity']:>10.6g} "
            f"{s['weighted_reciprocity_mean']:>10.6g} ± {s['weighted_reciprocity_sd']:<9.3g}\n"
            f"{'total weight':<22} {inp['total_weight']:>10d} "
            f"{s['total_weight_mean']:>10.6g} ± {s['total_weight_sd']:<9.3g}\n"
            f"eta_hat = {self.eta_hat:.6g}\n"
            f"expected weighted reciprocity = {self.expected_weighted_reciprocity:.6g}\n"
        )


def _input_stats(g: DirectedGraph) -> dict:
    return {
        "reciprocity": reciprocity(g),
        "weighted_reciprocity": weighted_reciprocity(g),
        "total_weight": g.total_weight,
        "avg_degree": g.total_weight / g.n_nodes,
        "n_nodes": g.n_nodes,
    }


def recovery_report(
    g: DirectedGraph, K: int, cfg: EmConfig | None = None, n_samples: int = 5, seed: int = 0
) -> RecoveryReport:
    """Fit on the whole graph, then sample ``n_samples`` networks with ``E[M]`` equal
    to the observed total weight. Sample ``s`` uses seed ``seed + s``."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    cfg = cfg or EmConfig()
    res = fit(g, K, cfg)
    params = rescale(res.params, g.total_weight)
    seeds = [seed + s for s in range(n_samples)]
    r, rw, mm = [], [], []
    for s in seeds:
        h = sample_benchmark(params, seed=s)
        mm.append(h.total_weight)
        r.append(reciprocity(h) if h.n_edges else 0.0)
        rw.append(weighted_reciprocity(h) if h.total_weight else 0.0)
    config = {"em": asdict(cfg), "K": K, "n_samples": n_samples, "sample_seed": seed}
    return RecoveryReport(
        input_stats=_input_stats(g),
        sample_reciprocity=r,
        sample_weighted_reciprocity=rw,
        sample_total_weight=mm,
        eta_hat=res.params.eta,
        expected_weighted_reciprocity=expected_weighted_reciprocity(params),
        final_lpl=res.final_lpl,
        seeds=seeds,
        config=config,
    )


@dataclass
class PlantedRecovery:
    eta_true: float
    eta_hat: float
    eta_error: float
    cosine_u: float
    cosine_v: float
    cosine: float
    f1_u: float
    f1_v: float
    f1: float
    baseline_cosine: float
    baseline_f1: float
    total_weight: int
    final_lpl: float
    config: dict = field(default_factory=dict)


def planted_recovery(cfg: PlantedConfig, emcfg: EmConfig | None = None) -> PlantedRecovery:
    """Generate a planted network, fit it with ``K = cfg.K`` and score the recovery.

    ``cosine`` and ``f1`` average the out- and in-membership scores. The
    baseline draws memberships from Dirichlet(``cfg.dirichlet_alpha``).
    """
    emcfg = emcfg or EmConfig()
    g, truth = generate_planted(cfg)
    res = fit(g, cfg.K, emcfg)
    p = res.params
    cu, cv = cosine_similarity(truth.u, p.u), cosine_similarity(truth.v, p.v)
    fu, fv = f1_hard(truth.u, p.u), f1_hard(truth.v, p.v)
    base = dirichlet_baseline(cfg.N, cfg.K, cfg.dirichlet_alpha, seed=cfg.seed)
    return PlantedRecovery(
        eta_true=cfg.eta,
        eta_hat=p.eta,
        eta_error=abs(p.eta - cfg.eta),
        cosine_u=cu, cosine_v=cv, cosine=(cu + cv) / 2,
        f1_u=fu, f1_v=fv, f1=(fu + fv) / 2,
        baseline_cosine=cosine_similarity(truth.u, base),
        baseline_f1=f1_hard(truth.u, base),
        total_weight=g.total_weight,
        final_lpl=res.final_lpl,
        config={"planted": asdict(cfg), "em": asdict(emcfg)},
    )
