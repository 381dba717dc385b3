"""Edge-list graphs, membership CSVs and JSON reports."""
from __future__ import annotations

import json
import re
import warnings
from pathlib import Path

import numpy as np

from .model import Graph

SCHEMA_VERSION = "1.0"
_HEADER = re.compile(r"^%\s*nodes=(\d+)\s+directed=([01])\s*$")


def write_edgelist(G: Graph, path) -> None:
    """One ``u<TAB>v`` line per edge; undirected graphs list each pair once with u < v."""
    adj = G.adj
    if G.directed:
        u, v = np.nonzero(adj)
    else:
        u, v = np.nonzero(np.triu(adj, 1))
    with open(path, "w") as f:
        f.write(f"% nodes={adj.shape[0]} directed={int(G.directed)}\n")
        np.savetxt(f, np.column_stack([u, v]), fmt="%d", delimiter="\t")


def read_edgelist(path, n: int | None = None, directed: bool | None = None) -> Graph:
    """Parse an edge list; ``n`` and ``directed`` override the optional header.

    Without a header n is the largest index + 1 and the graph is directed.
    """
    path = Path(path)
    with open(path) as f:
        first = f.readline().strip()
    m = _HEADER.match(first)
    hn, hdir = (int(m.group(1)), m.group(2) == "1") if m else (None, True)
    n = hn if n is None else n
    directed = hdir if directed is None else directed
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)   # an edgeless graph is valid input
        edges = np.loadtxt(path, comments=("#", "%"), dtype=np.int64, ndmin=2)
    if edges.size and edges.shape[1] != 2:
        raise ValueError(f"{path}: expected two columns per edge line")
    if edges.size and edges.min() < 0:
        raise ValueError(f"{path}: negative node index")
    top = int(edges.max()) + 1 if edges.size else 0
    n = top if n is None else n
    if top > n:
        raise ValueError(f"{path}: node index {top - 1} exceeds n={n}")
    adj = np.zeros((n, n), dtype=np.uint8)
    if edges.size:
        adj[edges[:, 0], edges[:, 1]] = 1
        if not directed:
            adj[edges[:, 1], edges[:, 0]] = 1
    np.fill_diagonal(adj, 0)
    return Graph(adj, directed=directed)


def write_memberships(pi, path) -> None:
    """k columns (one per community), one row per node."""
    pi = np.asarray(pi)
    header = ",".join(f"community_{i}" for i in range(pi.shape[0]))
    fmt = "%d" if np.issubdtype(pi.dtype, np.integer) else "%.17g"
    np.savetxt(path, pi.T, delimiter=",", header=header, comments="", fmt=fmt)


def read_memberships(path) -> np.ndarray:
    """Inverse of :func:`write_memberships`; returns k x n."""
    M = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return M.T


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, float) and not np.isfinite(x):
        return None if np.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


def estimate_report(est, metrics=None, config=None, extra=None) -> dict:
    """Plain-dict summary of a fit; the bulky arrays stay in the CSV outputs."""
    diag = {k: v for k, v in est.diagnostics.items() if k != "whitened_tensor"}
    rep = {
        "schema_version": SCHEMA_VERSION,
        "k": est.k,
        "n": est.n,
        "alpha0": est.alpha0,
        "P_hat": est.p_hat,
        "P_hat_raw": est.p_hat_raw,
        "alpha_hat": est.alpha_hat,
        "lambda": est.eigen.lam,
        "tau": est.tau,
        "xi": est.xi,
        "tensor_residual": est.eigen.residual_norm,
        "diagnostics": diag,
    }
    if metrics is not None:
        rep["metrics"] = metrics.to_dict() if hasattr(metrics, "to_dict") else metrics
    if config is not None:
        rep["config"] = config.to_dict() if hasattr(config, "to_dict") else config
    if extra:
        rep.update(extra)
    return _jsonable(rep)


def write_json(obj, path) -> None:
    with open(path, "w") as f:
        json.dump(_jsonable(obj), f, indent=2)
        f.write("\n")


def read_json(path) -> dict:
    with open(path) as f:
        return json.load(f)


def save_truth(path, pi, P, alpha=None, alpha0=0.0) -> None:
    np.savez(path, pi=pi, P=P, alpha=np.zeros(0) if alpha is None else alpha, alpha0=alpha0)


def load_truth(path):
    with np.load(path) as d:
        return d["pi"], d["P"], d["alpha"], float(d["alpha0"])
