"""Named synthetic experiments: generate, fit, evaluate, report."""
from __future__ import annotations

import copy
import time
import warnings
from pathlib import Path

import numpy as np

from .errors import UnknownPreset
from .io import estimate_report, write_json, SCHEMA_VERSION
from .model import MmsbModel, homogeneous_model, sample_graph
from .pipeline import FitConfig, evaluate, fit, check_assumptions

PRESETS = {
    "homogeneous-block": dict(k=3, n=1500, p=0.6, q=0.1, alpha0=0.0, seed=0),
    "homogeneous-mmsb": dict(k=3, n=4000, p=0.6, q=0.1, alpha0=1.0, seed=0),
    # clique of size s (default 2 n^{2/3}) inside G(n, 1/2)
    "planted-clique": dict(n=2000, s=None, q=0.5, seed=0),
    "scaling-sweep": dict(k=3, p=0.6, q=0.1, alpha0=1.0, multipliers=(4, 16, 64),
                          n_unit=25, seeds=(0, 1, 2, 3, 4)),
}


def _fit_keys(params):
    keys = {"N", "L", "tau", "xi", "tensor_xi", "c_tau", "C2", "fractions", "backend"}
    return {k: v for k, v in params.items() if k in keys}


def _single(model, params, seed, rng_pi=None):
    rng = np.random.default_rng(seed)
    pi = model.sample_memberships(rng) if rng_pi is None else rng_pi
    G = sample_graph(model, pi, rng)
    cfg = FitConfig(k=model.k, alpha0=float(model.alpha0), seed=seed,
                    undirected=not model.directed, **_fit_keys(params))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        est = fit(G, cfg)
    m = evaluate(est, pi, model.P)
    return est, m, cfg, pi, [f"{w.category.__name__}: {w.message}" for w in caught]


def _homogeneous(params):
    model = homogeneous_model(params["k"], params["n"], params["p"], params["q"],
                              params["alpha0"], directed=params.get("directed", True))
    est, m, cfg, _, warns = _single(model, params, params["seed"])
    theory = check_assumptions(model, cfg=cfg).to_dict()
    return estimate_report(est, m, cfg, {"theory_true": theory, "warnings": warns}), est


def _planted_clique(params):
    n = int(params["n"])
    s = params.get("s") or int(round(2 * n ** (2 / 3)))
    q = float(params["q"])
    rng = np.random.default_rng(params["seed"])
    clique = np.sort(rng.choice(n, size=s, replace=False))
    pi = np.zeros((2, n))
    pi[1] = 1.0
    pi[0, clique], pi[1, clique] = 1.0, 0.0
    P = np.array([[1.0, q], [q, q]])
    model = MmsbModel(alpha=[s / n, 1 - s / n], P=P, n=n, alpha0=0.0, directed=False)
    est, m, cfg, _, warns = _single(model, params, params["seed"] + 1, rng_pi=pi)
    perm = m.permutation
    S = est.support[perm]
    # the non-clique nodes tie under the argmax rule, so score the clique only
    recall = float(S[0, clique].mean())
    theory = check_assumptions(model, cfg=cfg).to_dict()
    extra = {"clique_size": s, "clique_recall": recall, "theory_true": theory,
             "warnings": warns}
    return estimate_report(est, m, cfg, extra), est


def _scaling_sweep(params):
    k = params["k"]
    ns = [int(mult * k * k * params["n_unit"]) for mult in params["multipliers"]]
    rows = []
    for n in ns:
        for seed in params["seeds"]:
            model = homogeneous_model(k, n, params["p"], params["q"], params["alpha0"])
            t0 = time.perf_counter()
            est, m, _, _, _ = _single(model, params, seed)
            rows.append({"n": n, "seed": seed, "err_pi_l1_per_node": m.err_pi_l1_per_node,
                         "err_P": m.err_P, "seconds": time.perf_counter() - t0})
    med = {n: float(np.median([r["err_pi_l1_per_node"] for r in rows if r["n"] == n]))
           for n in ns}
    medP = {n: float(np.median([r["err_P"] for r in rows if r["n"] == n])) for n in ns}
    dec = sum(med[a] > med[b] for a, b in zip(ns, ns[1:]))
    return {"schema_version": SCHEMA_VERSION, "preset": "scaling-sweep", "n_values": ns,
            "runs": rows, "median_err_pi_l1_per_node": med, "median_err_P": medP,
            "decreasing_pairs": dec, "pairs": len(ns) - 1}, None


_RUNNERS = {
    "homogeneous-block": _homogeneous,
    "homogeneous-mmsb": _homogeneous,
    "planted-clique": _planted_clique,
    "scaling-sweep": _scaling_sweep,
}


def run_experiment(preset: str, overrides: dict | None = None, out=None) -> dict:
    """Run a named preset with parameter ``overrides``; write the report to ``out`` if given."""
    if preset not in PRESETS:
        raise UnknownPreset(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    params = copy.deepcopy(PRESETS[preset])
    params.update(overrides or {})
    t0 = time.perf_counter()
    report, _ = _RUNNERS[preset](params)
    report["preset"] = preset
    report["params"] = params
    report["seconds"] = time.perf_counter() - t0
    if out is not None:
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        write_json(report, out)
    return report
