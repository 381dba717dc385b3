"""End-to-end fitting, evaluation against ground truth and assumption checks."""
from __future__ import annotations

import dataclasses
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionWarning, DimensionMismatch, TooFewNodes
from .model import Graph, MmsbModel
from .moments import (
    Partition5,
    adjacency,
    modified_adjacency,
    partition_nodes,
    submatrix_product,
    whitened_threestar,
)
from .reconstruction import (
    ModelEstimate,
    align_estimates,
    build_Q,
    default_tau,
    estimate_members,
    estimate_P,
    greedy_match,
    support_recovery,
    threshold,
    _row_corr,
)
from .tensor_power import default_iteration_count, tensor_eigen
from .whitening import compute_symmetrizer, compute_whitener


@dataclass
class FitConfig:
    k: int
    alpha0: float = 0.0
    seed: int = 0
    fractions: tuple = (0.2, 0.2, 0.2, 0.2, 0.2)
    N: int | None = None             # power iterations, None -> default_iteration_count
    L: int | None = None             # initializer cap, None -> min(|Y|, 10k + 100)
    tau: float | str = "auto"
    xi: float | str = "auto"         # support-recovery threshold
    tensor_xi: float | None = None   # deflation threshold, None -> 1% of lambda_1
    c_tau: float = 1.0
    C2: float = 10.0
    undirected: bool = False
    support: bool = True
    check: bool = True
    backend: str | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.alpha0 < 0:
            raise ValueError("alpha0 must be >= 0")
        fr = np.asarray(self.fractions, dtype=np.float64)
        if fr.size != 5 or np.any(fr <= 0) or fr.sum() > 1 + 1e-9:
            raise ValueError("fractions must be 5 positive numbers summing to at most 1")
        self.fractions = tuple(float(f) for f in fr)
        for name in ("tau", "xi"):
            v = getattr(self, name)
            if isinstance(v, str) and v != "auto":
                raise ValueError(f"{name} must be a number or 'auto'")

    @classmethod
    def from_dict(cls, d: dict) -> "FitConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def iterations(self) -> int:
        return self.N if self.N is not None else default_iteration_count(self.k, 1.0, c2=self.C2)


def _run_roles(G, k, alpha0, sets, wh, gm, a, b, c, y, cfg, timings):
    """One pass of the estimator with leaves (a, b, c) and head set y."""
    t0 = time.perf_counter()
    R_AB = compute_symmetrizer(wh[b], gm[b], gm[a], wh[a]).R
    R_AC = compute_symmetrizer(wh[c], gm[c], gm[a], wh[a]).R
    timings["whitening"] += time.perf_counter() - t0

    t0 = time.perf_counter()
    part = Partition5(A=sets[a], B=sets[b], C=sets[c], X=sets["X"], Y=sets[y])
    T = whitened_threestar(G, part, alpha0, wh[a].W, wh[b].W @ R_AB, wh[c].W @ R_AC,
                           backend=cfg.backend)
    timings["moments"] += time.perf_counter() - t0

    t0 = time.perf_counter()
    L = min(sets[y].size, 10 * k + 100) if cfg.L is None else min(cfg.L, sets[y].size)
    inits = submatrix_product(G, sets[y][:L], sets[a], wh[a].W)
    eigen = tensor_eigen(T, inits, cfg.iterations(), xi=cfg.tensor_xi, backend=cfg.backend)
    timings["tensor"] += time.perf_counter() - t0

    t0 = time.perf_counter()
    target = np.setdiff1d(np.arange(adjacency(G).shape[0]), sets[a])
    _, alpha_hat, raw = estimate_members(eigen, wh[a], G, target, 0.0, return_raw=True)
    timings["reconstruction"] += time.perf_counter() - t0
    return eigen, alpha_hat, target, raw, T


def _homogeneous_proxy(P_hat, k):
    p = float(np.mean(np.diag(P_hat)))
    q = float(P_hat[~np.eye(k, dtype=bool)].mean()) if k > 1 else 0.0
    return p, q


def fit(G: Graph, cfg: FitConfig) -> ModelEstimate:
    """Estimate memberships, community sizes and connectivity from one graph.

    Two passes share the whiteners computed from X: the first uses leaves
    (A, B, C) with heads Y and labels every node outside A, the second swaps
    A and Y to label A. The second pass is aligned to the first on the nodes
    both of them label.
    """
    k, alpha0 = cfg.k, float(cfg.alpha0)
    n = adjacency(G).shape[0]
    if n < 5 * k:
        raise TooFewNodes(f"need n >= 5k, got n={n}, k={k}")
    timings = dict.fromkeys(("partition", "moments", "whitening", "tensor",
                             "reconstruction", "support"), 0.0)

    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    part = partition_nodes(n, rng, cfg.fractions, k)
    part.validate(n, k)
    sets = part.sets()
    timings["partition"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    gm = {r: modified_adjacency(G, sets["X"], sets[r], alpha0) for r in "ABCY"}
    timings["moments"] += time.perf_counter() - t0
    t0 = time.perf_counter()
    wh = {r: compute_whitener(gm[r], k) for r in "ABCY"}
    timings["whitening"] += time.perf_counter() - t0

    eig1, ah1, tgt1, raw1, T1 = _run_roles(G, k, alpha0, sets, wh, gm, "A", "B", "C", "Y",
                                           cfg, timings)
    eig2, _, tgt2, raw2, _ = _run_roles(G, k, alpha0, sets, wh, gm, "Y", "B", "C", "A",
                                        cfg, timings)

    t0 = time.perf_counter()
    full1 = np.zeros((k, n))
    full1[:, tgt1] = raw1
    full2 = np.zeros((k, n))
    full2[:, tgt2] = raw2
    common = np.setdiff1d(np.arange(n), np.concatenate([sets["A"], sets["Y"]]))
    perm = align_estimates(full1[:, common], full2[:, common])
    full2 = full2[perm]
    eig2 = eig2.permuted(perm)
    pi_tilde = full1
    pi_tilde[:, sets["A"]] = full2[:, sets["A"]]
    if k == 1:
        # a single community leaves no freedom in the memberships
        pi_tilde = np.ones((1, n))

    if cfg.tau != "auto":
        tau = float(cfg.tau)
    elif alpha0 == 0:
        tau = default_tau(k, alpha0, n)
    else:
        # pilot fit at tau = 0 gives the p, q proxies for the threshold rule
        pilot, _ = estimate_P(build_Q(threshold(pi_tilde, 0.0), alpha0), G)
        p, q = _homogeneous_proxy(pilot, k)
        tau = default_tau(k, alpha0, n, p, q, cfg.c_tau) if p > q else 0.0
    pi_hat = threshold(pi_tilde, tau)
    Q = build_Q(pi_hat, alpha0)
    P_hat, P_raw = estimate_P(Q, G)
    timings["reconstruction"] += time.perf_counter() - t0

    est = ModelEstimate(pi_hat=pi_hat, p_hat=P_hat, alpha_hat=ah1, eigen=eig1, tau=tau,
                        p_hat_raw=P_raw, pi_tilde=pi_tilde, partition=part, alpha0=alpha0)

    if cfg.support:
        t0 = time.perf_counter()
        xi = None if cfg.xi == "auto" else float(cfg.xi)
        S, info = support_recovery(G, pi_hat, alpha0, xi, part, return_info=True)
        est.support = S
        if info["xi"]:
            est.xi = float(np.mean(info["xi"]))
        elif xi is not None:
            est.xi = xi
        est.diagnostics["support"] = info
        timings["support"] = time.perf_counter() - t0

    est.diagnostics.update({
        "timings": timings,
        "alignment": perm.tolist(),
        "eigen_swap": {"lam": eig2.lam.tolist(), "residual_norm": eig2.residual_norm},
        "alpha_hat_swap": (eig2.lam**-2.0).tolist(),
        "iterations": cfg.iterations(),
        "tensor_xi": eig1.xi,
        "whitened_tensor": T1,
    })
    if cfg.check:
        diag = check_assumptions(est, n, cfg)
        est.diagnostics["theory"] = diag.to_dict()
        if not diag.all_pass:
            failed = [c for c, v in diag.conditions.items() if not v["pass"]]
            warnings.warn(f"assumption checks failed: {failed}", AssumptionWarning)
    return est


# --------------------------------------------------------------- diagnostics

@dataclass
class TheoryDiagnostics:
    rho: float
    zeta: float
    alpha_hat_min: float
    alpha_hat_max: float
    sigma_min_P: float
    conditions: dict = field(default_factory=dict)   # name -> {"pass", "margin", ...}
    separation_stat: float | None = None

    @property
    def all_pass(self) -> bool:
        return all(c["pass"] for c in self.conditions.values())

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["all_pass"] = self.all_pass
        return d


def _cond(required, actual, larger_is_ok=True, **extra):
    if larger_is_ok:
        margin = math.inf if required <= 0 else actual / required
    else:
        margin = math.inf if actual <= 0 else required / actual
    return {"pass": bool(margin >= 1.0), "margin": float(margin),
            "required": float(required), "actual": float(actual), **extra}


def _is_homogeneous(P, tol=1e-9):
    k = P.shape[0]
    d = np.diag(P)
    off = P[~np.eye(k, dtype=bool)]
    return np.ptp(d) <= tol and (off.size == 0 or np.ptp(off) <= tol)


def check_assumptions(obj, n: int | None = None, cfg: FitConfig | None = None) -> TheoryDiagnostics:
    """Evaluate the sample-size and conditioning requirements with unit constants.

    ``obj`` is an :class:`MmsbModel` (true parameters) or a
    :class:`ModelEstimate` (plug-in). Margins are ratios, >= 1 meaning pass;
    the hidden constants of the asymptotic statements are taken as 1 so the
    margins indicate scale rather than certify the guarantees.
    """
    if isinstance(obj, MmsbModel):
        P, ah, alpha0 = obj.P, obj.alpha_hat, float(obj.alpha0)
        n = obj.n if n is None else n
        tau = None
    else:
        P, ah, alpha0 = np.asarray(obj.p_hat), np.asarray(obj.alpha_hat), float(obj.alpha0)
        ah = ah / ah.sum()
        tau = obj.tau
        if n is None:
            n = obj.n
    k = P.shape[0]
    amin, amax = float(ah.min()), float(ah.max())
    sig = float(np.linalg.svd(P, compute_uv=False).min())
    maxPa = float((P @ ah).max())
    rho = (alpha0 + 1.0) / amin
    zeta = math.sqrt(amax / amin) * math.sqrt(maxPa) / sig if sig > 0 else math.inf

    conds = {}
    alpha = alpha0 * ah
    conds["B1"] = {"pass": bool(alpha0 == 0 or np.all(alpha < 1)),
                   "margin": float(math.inf if alpha0 == 0 else 1.0 / alpha.max()),
                   "required": 1.0, "actual": float(alpha.max())}
    conds["B2"] = _cond(rho**2 * math.log(k) ** 2, n)
    bound = math.sqrt(n) / rho if alpha0 < 1 else math.sqrt(n) / (rho * k * amax)
    conds["B3"] = _cond(bound, zeta, larger_is_ok=False)
    C2 = cfg.C2 if cfg is not None else 10.0
    N = cfg.iterations() if cfg is not None else default_iteration_count(k, 1.0, c2=C2)
    ratio = sig / maxPa if maxPa > 0 else math.inf
    loglog = math.log(math.log(ratio)) if ratio > math.e else 0.0
    conds["B4"] = _cond(C2 * (math.log(k) + loglog), N)
    tau_theory = (0.5 if alpha0 == 0 else
                  math.sqrt(rho) * zeta * math.sqrt(amax) / (math.sqrt(n) * amin))
    if tau is not None and math.isfinite(tau_theory) and tau_theory > 0:
        r = tau / tau_theory
        conds["B5"] = {"pass": bool(0.1 <= r <= 10.0), "margin": float(min(r, 1 / r) * 10.0)
                       if r > 0 else 0.0, "required": tau_theory, "actual": float(tau)}

    sep = None
    if _is_homogeneous(P):
        p = float(P[0, 0])
        q = float(P[0, 1]) if k > 1 else 0.0
        sep = (p - q) / math.sqrt(p) if p > 0 else 0.0
        conds["A2"] = _cond(k**2 * (alpha0 + 1.0) ** 2, n)
        zh = math.sqrt(p) / (p - q) if p > q else math.inf
        conds["A3"] = _cond(math.sqrt(n) / ((alpha0 + 1.0) * k), zh, larger_is_ok=False)
    return TheoryDiagnostics(rho=rho, zeta=zeta, alpha_hat_min=amin, alpha_hat_max=amax,
                             sigma_min_P=sig, conditions=conds, separation_stat=sep)


# ------------------------------------------------------------------- metrics

@dataclass
class Metrics:
    err_pi_l1: float
    err_pi_l1_per_node: float
    err_P: float
    support_recall: float | None = None
    support_specificity: float | None = None
    support_precision: float | None = None
    accuracy: float | None = None
    tensor_residual: float | None = None
    wall_times: dict = field(default_factory=dict)
    permutation: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def match_to_truth(pi_hat, pi_true) -> np.ndarray:
    """perm with pi_hat[perm] aligned to the rows of pi_true."""
    k = pi_true.shape[0]
    if k == 1:
        return np.zeros(1, dtype=np.int64)
    # rows of the score are truth labels, columns estimated labels
    return greedy_match(_row_corr(pi_true, pi_hat))


def evaluate(est: ModelEstimate, pi_true, P_true, xi: float | None = None) -> Metrics:
    """Errors of an estimate after aligning its labels to the truth.

    Support bands: entries with Pi >= xi should be detected (recall), those
    with Pi <= xi / 2 should not (specificity); precision is the share of
    detections outside the lower band. ``xi`` defaults to the estimate's own.
    """
    pi_true = np.asarray(pi_true, dtype=np.float64)
    P_true = np.asarray(P_true, dtype=np.float64)
    if pi_true.shape != est.pi_hat.shape or P_true.shape != est.p_hat.shape:
        raise DimensionMismatch("estimate and truth shapes differ")
    perm = match_to_truth(est.pi_hat, pi_true)
    pi = est.pi_hat[perm]
    P = est.p_hat[np.ix_(perm, perm)]
    err_rows = np.abs(pi - pi_true).sum(axis=1)
    n = pi_true.shape[1]
    m = Metrics(err_pi_l1=float(err_rows.max()), err_pi_l1_per_node=float(err_rows.max() / n),
                err_P=float(np.abs(P - P_true).max()),
                tensor_residual=float(est.eigen.residual_norm),
                wall_times=dict(est.diagnostics.get("timings", {})),
                permutation=perm.tolist())
    if est.support is not None:
        S = est.support[perm].astype(bool)
        if est.alpha0 == 0:
            truth = pi_true >= 0.5
            m.accuracy = float(np.mean(np.all(S == truth, axis=0)))
        x = est.xi if xi is None else xi
        if x is None and est.alpha0 == 0:
            x = 0.5
        if x is not None:
            hi, lo = pi_true >= x, pi_true <= x / 2
            m.support_recall = float(S[hi].mean()) if hi.any() else 1.0
            m.support_specificity = float((~S[lo]).mean()) if lo.any() else 1.0
            m.support_precision = float((~lo[S]).mean()) if S.any() else 1.0
    return m
