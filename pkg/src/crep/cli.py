"""Command-line interface: ``crep {fit,generate,predict,cv,report}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Structured outputs are JSON with sorted keys and no timestamps, so a rerun
with the same inputs, flags and seed (and ``--workers 1``) is byte-identical.
"""

from __future__ import annotations

import argparse
import json
import logging
import secrets
import sys
from dataclasses import asdict

import numpy as np

from . import io as crep_io
from .evaluation import cross_validate, recovery_report
from .generators import (
    HLParams,
    PlantedConfig,
    build_planted_params,
    rescale,
    sample_benchmark,
    sample_hl,
    theta_from_density,
)
from .graph import DirectedGraph, EdgeListError, read_edge_list, restrict_to_core, write_edge_list
from .inference import EmConfig, FitError, fit
from .metrics import AUCError, cr_ratio, reciprocity, score_pairs, weighted_reciprocity

DEFAULT_SEED = 0

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

_MODES = {"constrained": "constrained", "unconstrained": "unconstrained", "eta0": "eta_zero"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _seed(text: str) -> int:
    if text == "random":
        return secrets.randbelow(2**31)
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer or 'random', got {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError("seed must be nonnegative")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _k_grid(text: str) -> list[int]:
    try:
        ks = [int(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad K grid {text!r}")
    if not ks or min(ks) < 1:
        raise argparse.ArgumentTypeError("K grid needs positive integers")
    return ks


def _em_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=sorted(_MODES), default="constrained",
                   help="membership normalization / reciprocity switch (default: constrained)")
    p.add_argument("--restarts", type=_positive_int, default=10,
                   help="random initializations, best kept (default: 10)")
    p.add_argument("--max-iter", type=_positive_int, default=1000,
                   help="EM iteration cap per restart (default: 1000)")
    p.add_argument("--tol", type=float, default=1e-4,
                   help="absolute log-pseudo-likelihood change for convergence (default: 1e-4)")
    p.add_argument("--workers", type=_positive_int, default=1,
                   help="parallel processes; 1 gives bit-exact reruns (default: 1)")
    p.add_argument("--core", action="store_true",
                   help="keep only nodes with in- and out-edges in the largest weak component")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=_seed, default=DEFAULT_SEED,
                   help=f"integer or 'random' (default: {DEFAULT_SEED})")
    p.add_argument("--out", help="output file for the structured result")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="crep", description="Community and reciprocity model for directed networks.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit the model to an edge list")
    p.add_argument("graph", help="edge list: src dst [weight] per line")
    p.add_argument("--k", type=_positive_int, required=True, help="number of communities")
    _em_flags(p)
    _common(p)

    p = sub.add_parser("generate", help="sample a synthetic network")
    p.add_argument("kind", choices=["benchmark", "sbm", "hl"])
    p.add_argument("--n", type=_positive_int, default=500, help="nodes (default: 500)")
    p.add_argument("--k", type=_positive_int, default=3, help="communities (default: 3)")
    p.add_argument("--avg-degree", type=float, default=20.0, help="<k> = M/N (default: 20)")
    p.add_argument("--eta", type=float, default=0.5, help="reciprocity, benchmark only (default: 0.5)")
    p.add_argument("--overlap", type=float, default=0.0,
                   help="fraction of nodes with mixed membership (default: 0)")
    p.add_argument("--expected-edges", type=float, default=None,
                   help="target E[M] (default: avg-degree * n)")
    p.add_argument("--p", type=float, default=0.002,
                   help="hl: marginal edge probability used to set theta (default: 0.002)")
    p.add_argument("--theta", type=float, default=None, help="hl: density parameter (overrides --p)")
    p.add_argument("--alpha", type=float, default=0.0, help="hl: reciprocity coupling (default: 0)")
    p.add_argument("--truth", help="ground-truth parameter file (default: OUT.truth.json)")
    _common(p)

    p = sub.add_parser("predict", help="score node pairs with a saved fit")
    p.add_argument("fit", help="parameter document written by 'crep fit'")
    p.add_argument("--pairs", required=True, help="file with one 'src dst' pair per line")
    p.add_argument("--graph", help="observed edge list; enables truth and conditional scores")
    _common(p)

    p = sub.add_parser("cv", help="cross-validated edge prediction and K selection")
    p.add_argument("graph")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--k", type=_positive_int, help="single K")
    g.add_argument("--k-grid", type=_k_grid, help="comma-separated K values")
    p.add_argument("--folds", type=_positive_int, default=5, help="fold count (default: 5)")
    _em_flags(p)
    _common(p)

    p = sub.add_parser("report", help="fit, resample and compare reciprocity statistics")
    p.add_argument("graph")
    p.add_argument("--k", type=_positive_int, required=True)
    p.add_argument("--samples", type=int, default=5, help="networks to sample (default: 5)")
    _em_flags(p)
    _common(p)
    return parser


def _em_config(args) -> EmConfig:
    if not args.tol > 0:
        raise UsageError("--tol must be positive")
    return EmConfig(mode=_MODES[args.mode], max_iter=args.max_iter, tol=args.tol,
                    restarts=args.restarts, seed=args.seed, workers=args.workers)


def _load_graph(path, core=False):
    g = read_edge_list(path)
    return restrict_to_core(g) if core else g


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def cmd_fit(args) -> int:
    cfg = _em_config(args)
    g = _load_graph(args.graph, args.core)
    res = fit(g, args.k, cfg)
    config = {"command": "fit", "graph": args.graph, "K": args.k, "core": args.core,
              "em": asdict(cfg)}
    _emit(crep_io.fit_to_json(res, g.labels(), config), args.out)
    p = res.params
    print(f"eta={p.eta:.6g}")
    print(f"log_pseudo_likelihood={res.final_lpl:.6g}")
    print(f"n_iter={res.n_iter}")
    print(f"restart={res.restart_index}")
    if p.eta < 1:
        print(f"cr_ratio={cr_ratio(p):.6g}")
    return EXIT_OK


def cmd_generate(args) -> int:
    if not args.out:
        raise UsageError("generate needs --out")
    truth_path = args.truth or args.out + ".truth.json"
    if args.kind == "hl":
        theta = args.theta if args.theta is not None else theta_from_density(args.p, args.alpha)
        g = sample_hl(args.n, theta, args.alpha, seed=args.seed)
        hl = HLParams(theta, args.alpha)
        doc = {"format": "crep-hl", "version": 1, "ground_truth": True, "n_nodes": args.n,
               "theta": theta, "alpha": args.alpha, "edge_probability": hl.edge_probability,
               "expected_reciprocity": hl.expected_reciprocity, "seed": args.seed}
        truth_text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    else:
        eta = 0.0 if args.kind == "sbm" else args.eta
        if not 0 <= eta < 1:
            raise UsageError(f"--eta must be in [0, 1), got {eta}")
        if not 0 <= args.overlap <= 1:
            raise UsageError("--overlap must be in [0, 1]")
        if args.k > args.n:
            raise UsageError("--k cannot exceed --n")
        cfg = PlantedConfig(N=args.n, K=args.k, avg_degree=args.avg_degree, eta=eta,
                            overlap=args.overlap, expected_edges=args.expected_edges,
                            seed=args.seed)
        params = rescale(build_planted_params(cfg), cfg.target_edges)
        g = sample_benchmark(params, seed=args.seed)
        config = {"command": "generate", "kind": args.kind, "planted": asdict(cfg)}
        truth_text = crep_io.truth_to_json(params, g.labels(), config)
    write_edge_list(g, args.out)
    _emit(truth_text, truth_path)
    print(f"M={g.total_weight}")
    print(f"n_edges={g.n_edges}")
    if g.n_edges:
        print(f"r={reciprocity(g):.6g}")
        print(f"r_w={weighted_reciprocity(g):.6g}")
    return EXIT_OK


def cmd_predict(args) -> int:
    with open(args.fit, encoding="utf-8") as fh:
        doc = crep_io.load_params_document(fh.read())
    params = doc["params"]
    index = {lab: n for n, lab in enumerate(doc["node_labels"])}
    with open(args.pairs, "rb") as fh:
        text = fh.read().decode("utf-8")
    src, dst, raw = [], [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.replace(",", " ").split()
        if len(fields) < 2:
            raise EdgeListError(f"{args.pairs} line {lineno}: expected 'src dst'")
        a, b = fields[0], fields[1]
        for lab in (a, b):
            if lab not in index:
                raise EdgeListError(f"{args.pairs} line {lineno}: unknown node {lab!r}")
        src.append(index[a])
        dst.append(index[b])
        raw.append((a, b))
    if not raw:
        raise EdgeListError(f"{args.pairs}: no pairs")
    pairs = (np.array(src), np.array(dst))

    if args.graph:
        obs = read_edge_list(args.graph)
        # align the observed graph to the fit's node order
        remap = np.array([index.get(lab, -1) for lab in obs.labels()])
        keep = (remap[obs.src] >= 0) & (remap[obs.dst] >= 0)
        g = DirectedGraph.from_arrays(params.N, remap[obs.src[keep]], remap[obs.dst[keep]],
                                      obs.weight[keep])
    else:
        g = DirectedGraph.from_arrays(params.N, [], [], [])
    regular = score_pairs(params, g, pairs, "regular") if params.eta < 1 else None
    conditional = score_pairs(params, g, pairs, "conditional")

    header = ["src", "dst", "regular"] + (["conditional", "truth"] if args.graph else [])
    lines = ["\t".join(header)]
    for n, (a, b) in enumerate(raw):
        row = [a, b, f"{regular.score[n]:.6g}" if regular is not None else "nan"]
        if args.graph:
            row += [f"{conditional.score[n]:.6g}", str(int(conditional.truth[n]))]
        lines.append("\t".join(row))
    out = "\n".join(lines) + "\n"
    if args.out:
        _emit(out, args.out)
    else:
        sys.stdout.write(out)
    return EXIT_OK


def cmd_cv(args) -> int:
    cfg = _em_config(args)
    g = _load_graph(args.graph, args.core)
    grid = args.k_grid if args.k_grid else [args.k]
    if args.folds < 2:
        raise UsageError("--folds must be at least 2")
    report = cross_validate(g, grid, cfg, fold_count=args.folds, seed=args.seed,
                            workers=args.workers)
    report.config.update(command="cv", graph=args.graph, core=args.core)
    _emit(report.to_json(), args.out)
    sys.stdout.write(report.table())
    best = report.summary(report.best_k)
    print(f"best_k={report.best_k}")
    print(f"regular_auc={best.regular_mean:.6g}")
    print(f"conditional_auc={best.conditional_mean:.6g}")
    return EXIT_OK


def cmd_report(args) -> int:
    if args.samples < 1:
        raise UsageError("--samples must be at least 1")
    cfg = _em_config(args)
    g = _load_graph(args.graph, args.core)
    rep = recovery_report(g, args.k, cfg, n_samples=args.samples, seed=args.seed)
    rep.config.update(command="report", graph=args.graph, core=args.core)
    _emit(rep.to_json(), args.out)
    sys.stdout.write(rep.table())
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "generate": cmd_generate, "predict": cmd_predict, "cv": cmd_cv,
            "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"crep {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"crep: file not found: {exc.filename}", file=sys.stderr)
        return EXIT_DATA
    except (EdgeListError, crep_io.DocumentError, UnicodeDecodeError, OSError) as exc:
        print(f"crep: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FitError, AUCError, FloatingPointError) as exc:
        print(f"crep: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"crep: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
