"""Command line interface: ``tensormmsb <command> [options]``.

Exit codes: 0 success, 1 error, 2 failed assumption checks under ``--strict``.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings

import numpy as np

from . import io
from .errors import AssumptionWarning, MMSBError
from .experiments import PRESETS, run_experiment
from .model import MmsbModel, homogeneous_model, sample_graph
from .moments import partition_nodes
from .pipeline import FitConfig, check_assumptions, evaluate, fit
from .reconstruction import ModelEstimate, support_recovery
from .tensor_power import EigenPairs


def _load_config(path):
    if path is None:
        return {}
    with open(path) as f:
        return json.load(f)


def _merged(args, keys):
    """Config-file values overridden by explicitly given command-line flags."""
    cfg = _load_config(args.config)
    for key in keys:
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    return cfg


def _number_or_auto(s):
    return s if s == "auto" else float(s)


def _model_from(cfg) -> MmsbModel:
    k, n = int(cfg["k"]), int(cfg["n"])
    directed = not cfg.get("undirected", False)
    if "P" in cfg:
        alpha = cfg.get("alpha", [1.0 / k] * k)
        return MmsbModel(alpha=alpha, P=cfg["P"], n=n, alpha0=cfg.get("alpha0"),
                         directed=directed)
    return homogeneous_model(k, n, float(cfg["p"]), float(cfg["q"]),
                             float(cfg.get("alpha0", 0.0)), directed=directed)


def cmd_generate(args):
    cfg = _merged(args, ["k", "n", "p", "q", "alpha0", "undirected"])
    model = _model_from(cfg)
    rng = np.random.default_rng(cfg.get("seed", 0))
    pi = model.sample_memberships(rng)
    G = sample_graph(model, pi, rng)
    io.write_edgelist(G, args.out)
    if args.truth:
        io.save_truth(args.truth, pi, model.P, model.alpha, model.alpha0)
    print(f"wrote {G.n} nodes, {G.n_edges()} edges to {args.out}")
    return 0


def _fit_config(args):
    cfg = _merged(args, ["k", "alpha0", "N", "L", "tau", "xi", "c_tau", "C2", "backend"])
    if getattr(args, "undirected", False):
        cfg["undirected"] = True
    return FitConfig.from_dict(cfg)


def cmd_fit(args):
    cfg = _fit_config(args)
    G = io.read_edgelist(args.graph, directed=False if cfg.undirected else None)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        est = fit(G, cfg)
    for w in caught:
        print(f"warning: {w.category.__name__}: {w.message}", file=sys.stderr)
    failed = any(issubclass(w.category, AssumptionWarning) for w in caught)
    metrics = None
    if args.truth:
        pi, P, _, _ = io.load_truth(args.truth)
        metrics = evaluate(est, pi, P)
    if args.out_pi:
        io.write_memberships(est.pi_hat, args.out_pi)
    if args.out_support and est.support is not None:
        io.write_memberships(est.support, args.out_support)
    report = io.estimate_report(est, metrics, cfg)
    if args.report:
        io.write_json(report, args.report)
    print(json.dumps({"P_hat": report["P_hat"], "alpha_hat": report["alpha_hat"],
                      "tau": report["tau"]}))
    return 2 if (failed and args.strict) else 0


def cmd_eval(args):
    rep = io.read_json(args.report)
    pi_hat = io.read_memberships(args.pi)
    lam = np.asarray(rep["lambda"], dtype=np.float64)
    eig = EigenPairs(lam=lam, phi=np.eye(lam.size),
                     residual_norm=float(rep.get("tensor_residual") or np.nan))
    est = ModelEstimate(pi_hat=pi_hat, p_hat=np.asarray(rep["P_hat"]),
                        alpha_hat=np.asarray(rep["alpha_hat"]), eigen=eig,
                        tau=rep["tau"], xi=rep.get("xi"), alpha0=rep["alpha0"],
                        diagnostics={"timings": rep.get("diagnostics", {}).get("timings", {})})
    if args.support:
        est.support = io.read_memberships(args.support).astype(np.int8)
    pi, P, _, _ = io.load_truth(args.truth)
    m = evaluate(est, pi, P, xi=args.xi)
    out = {"schema_version": io.SCHEMA_VERSION, "metrics": m.to_dict()}
    if args.out:
        io.write_json(out, args.out)
    print(json.dumps(io._jsonable(out)))
    return 0


def cmd_support(args):
    cfg = _fit_config(args)
    G = io.read_edgelist(args.graph, directed=False if cfg.undirected else None)
    pi_hat = io.read_memberships(args.pi)
    part = partition_nodes(G.n, np.random.default_rng(cfg.seed), cfg.fractions, cfg.k)
    xi = None if cfg.xi == "auto" else float(cfg.xi)
    S = support_recovery(G, pi_hat, cfg.alpha0, xi, part)
    io.write_memberships(S, args.out)
    print(f"wrote support for {S.shape[1]} nodes to {args.out}")
    return 0


def cmd_check(args):
    cfg = _merged(args, ["k", "n", "p", "q", "alpha0", "N"])
    model = _model_from(cfg)
    fcfg = FitConfig(k=model.k, alpha0=float(model.alpha0),
                     N=cfg.get("N"), C2=cfg.get("C2", 10.0))
    diag = check_assumptions(model, cfg=fcfg)
    print(json.dumps(io._jsonable(diag.to_dict()), indent=2))
    return 2 if (args.strict and not diag.all_pass) else 0


def _parse_override(s):
    key, _, val = s.partition("=")
    try:
        return key, json.loads(val)
    except json.JSONDecodeError:
        return key, val


def cmd_experiment(args):
    overrides = _load_config(args.config)
    overrides.update(dict(_parse_override(s) for s in args.set or []))
    if args.seed is not None:
        overrides["seed"] = args.seed
    rep = run_experiment(args.preset, overrides, out=args.out)
    keys = ("preset", "seconds", "metrics", "clique_recall", "median_err_pi_l1_per_node",
            "decreasing_pairs")
    print(json.dumps(io._jsonable({k: rep[k] for k in keys if k in rep}), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tensormmsb",
                                 description="Tensor-method community detection for mixed membership graphs")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--config", help="JSON file with default option values")
        return p

    def model_args(p):
        p.add_argument("--k", type=int)
        p.add_argument("--n", type=int)
        p.add_argument("--p", type=float)
        p.add_argument("--q", type=float)
        p.add_argument("--alpha0", type=float)

    def fit_args(p):
        p.add_argument("--k", type=int)
        p.add_argument("--alpha0", type=float)
        p.add_argument("--N", type=int, help="power iterations")
        p.add_argument("--L", type=int, help="initializer cap")
        p.add_argument("--tau", type=_number_or_auto)
        p.add_argument("--xi", type=_number_or_auto)
        p.add_argument("--c-tau", dest="c_tau", type=float)
        p.add_argument("--C2", type=float)
        p.add_argument("--backend", choices=["numba", "numpy"])
        p.add_argument("--undirected", action="store_true")

    p = common(sub.add_parser("generate", help="sample a synthetic graph"))
    model_args(p)
    p.add_argument("--undirected", action="store_true", default=None)
    p.add_argument("--out", required=True, help="edge-list output")
    p.add_argument("--truth", help="npz file for the true memberships and P")
    p.set_defaults(func=cmd_generate)

    p = common(sub.add_parser("fit", help="estimate memberships and P from an edge list"))
    p.add_argument("graph")
    fit_args(p)
    p.add_argument("--out-pi", help="CSV for the membership estimate")
    p.add_argument("--out-support", help="CSV for the support estimate")
    p.add_argument("--report", help="JSON report")
    p.add_argument("--truth", help="npz truth file to evaluate against")
    p.add_argument("--strict", action="store_true", help="exit 2 if assumption checks fail")
    p.set_defaults(func=cmd_fit)

    p = common(sub.add_parser("eval", help="score saved estimates against a truth file"))
    p.add_argument("--report", required=True)
    p.add_argument("--pi", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--support")
    p.add_argument("--xi", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = common(sub.add_parser("support", help="support recovery from a membership estimate"))
    p.add_argument("graph")
    p.add_argument("--pi", required=True)
    fit_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_support)

    p = common(sub.add_parser("check", help="theory diagnostics for model parameters"))
    model_args(p)
    p.add_argument("--N", type=int)
    p.add_argument("--strict", action="store_true")
    p.set_defaults(func=cmd_check)

    p = common(sub.add_parser("experiment", help="run a named preset"))
    p.add_argument("preset", help="one of: " + ", ".join(sorted(PRESETS)))
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a preset value")
    p.add_argument("--out", help="JSON report path")
    p.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (MMSBError, OSError, ValueError, KeyError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
