"""From tensor eigen-pairs to memberships, community sizes and connectivity."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AmbiguousAlignment,
    DegenerateSeparation,
    DimensionMismatch,
    EmptyCommunity,
    NonPositiveEigenvalue,
    NotHomophilic,
)
from .moments import ROLES, Partition5, adjacency, submatrix_product
from .tensor_power import EigenPairs
from .whitening import Whitener

LAMBDA_FLOOR = 1e-8
TIE_TOL = 1e-9


@dataclass
class ModelEstimate:
    pi_hat: np.ndarray               # k x n, thresholded
    p_hat: np.ndarray                # k x k clamped to [0, 1]
    alpha_hat: np.ndarray            # lambda^-2
    eigen: EigenPairs
    tau: float
    xi: float | None = None
    support: np.ndarray | None = None   # k x n in {0, 1}
    p_hat_raw: np.ndarray | None = None
    pi_tilde: np.ndarray | None = None  # before thresholding
    partition: Partition5 | None = None
    alpha0: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.pi_hat.shape[0]

    @property
    def n(self) -> int:
        return self.pi_hat.shape[1]


def threshold(M, tau: float) -> np.ndarray:
    """Entries below ``tau`` become exactly zero."""
    M = np.asarray(M, dtype=np.float64)
    return np.where(M >= tau, M, 0.0)


def estimate_members(eigen: EigenPairs, W_A: Whitener, G, target_nodes, tau: float,
                     return_raw: bool = False):
    """Memberships of ``target_nodes`` (outside A) and alpha_hat = lambda^-2.

    pi~ = diag(lambda)^-1 Phi' W_A' G[target, A]', thresholded at ``tau``.
    """
    lam = np.asarray(eigen.lam, dtype=np.float64)
    if np.any(~(lam > LAMBDA_FLOOR)):
        raise NonPositiveEigenvalue(f"eigenvalues {lam} fall below {LAMBDA_FLOOR}")
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    target_nodes = np.asarray(target_nodes)
    if np.intersect1d(target_nodes, W_A.cols).size:
        raise DimensionMismatch("target nodes must lie outside the whitened set")
    proj = W_A.W @ eigen.phi / lam                     # |A| x k
    raw = submatrix_product(G, target_nodes, W_A.cols, proj).T
    alpha_hat = lam**-2.0
    pi = threshold(raw, tau)
    return (pi, alpha_hat, raw) if return_raw else (pi, alpha_hat)


def default_tau(k: int, alpha0: float, n: int, p: float | None = None,
                q: float | None = None, c_tau: float = 1.0) -> float:
    """0.5 for the block model, else c_tau * k sqrt(alpha0 / n) * sqrt(p) / (p - q)."""
    if n <= 0:
        raise ValueError("n must be positive")
    if alpha0 == 0:
        return 0.5
    if p is None or q is None or not p > q:
        raise DegenerateSeparation(f"need p > q, got p={p}, q={q}")
    return float(c_tau * k * np.sqrt(alpha0) / np.sqrt(n) * np.sqrt(p) / (p - q))


def _row_corr(X, Y):
    Xc = X - X.mean(axis=1, keepdims=True)
    Yc = Y - Y.mean(axis=1, keepdims=True)
    nx = np.linalg.norm(Xc, axis=1)
    ny = np.linalg.norm(Yc, axis=1)
    C = Xc @ Yc.T
    denom = np.outer(nx, ny)
    with np.errstate(invalid="ignore", divide="ignore"):
        C = np.where(denom > 0, C / np.where(denom > 0, denom, 1.0), 0.0)
    return C


def greedy_match(score) -> np.ndarray:
    """Greedy max-score assignment; returns perm with row i matched to column perm[i].

    Competing entries tied within 1e-9 warn and take the lowest flat index.
    """
    S = np.array(score, dtype=np.float64)
    k = S.shape[0]
    perm = np.full(k, -1)
    for _ in range(k):
        best = S.max()
        ties = np.flatnonzero(np.abs(S.ravel() - best) <= TIE_TOL)
        i, j = divmod(int(ties[0]), k)
        rows, cols = np.divmod(ties, k)
        # equal scores on disjoint pairs are compatible; only competing ones are ambiguous
        if np.any((rows == i) ^ (cols == j)):
            warnings.warn("alignment tie within 1e-9; lowest index used", AmbiguousAlignment)
        perm[i] = j
        S[i, :] = -np.inf
        S[:, j] = -np.inf
    return perm


def align_estimates(pi_a, pi_y, common=None) -> np.ndarray:
    """Permutation ``perm`` such that ``pi_y[perm]`` carries the labels of ``pi_a``.

    Both inputs are k x n over the same node indexing; ``common`` selects the
    columns used for matching (default: all).
    """
    pi_a, pi_y = np.asarray(pi_a, dtype=np.float64), np.asarray(pi_y, dtype=np.float64)
    if pi_a.shape[0] != pi_y.shape[0]:
        raise DimensionMismatch("estimates must have the same number of communities")
    k = pi_a.shape[0]
    if k == 1:
        return np.zeros(1, dtype=np.int64)
    if common is not None:
        common = np.asarray(common)
        if common.size < k:
            raise DimensionMismatch("need at least k common nodes")
        pi_a, pi_y = pi_a[:, common], pi_y[:, common]
    # signed: estimates are nonnegative after the sign fix, and with k = 2 the
    # rows are near mirror images so |corr| cannot tell a match from a swap
    return greedy_match(_row_corr(pi_a, pi_y))


def build_Q(pi_hat, alpha0: float, n: int | None = None) -> np.ndarray:
    """Rows (alpha0 + 1) pi^i / |pi^i|_1 - alpha0 / n, n defaulting to the column count."""
    pi_hat = np.asarray(pi_hat, dtype=np.float64)
    n = pi_hat.shape[1] if n is None else n
    l1 = np.abs(pi_hat).sum(axis=1)
    if np.any(l1 <= 0):
        raise EmptyCommunity(f"communities {np.flatnonzero(l1 <= 0).tolist()} have no mass")
    return (alpha0 + 1.0) * pi_hat / l1[:, None] - alpha0 / n


def estimate_P(Q, G, clamp: bool = True):
    """Q G Q'. Returns (clamped, raw) when ``clamp`` is true."""
    Q = np.asarray(Q, dtype=np.float64)
    n = Q.shape[1]
    if adjacency(G).shape[0] != n:
        raise DimensionMismatch("Q columns must match the graph size")
    raw = Q @ submatrix_product(G, None, None, Q.T)
    return (np.clip(raw, 0.0, 1.0), raw) if clamp else raw


# (target, source) pairs; every set is labelled once by averaging edges into
# the next set, nodes outside the partition use A as the source
SUPPORT_SCHEDULE = tuple(zip(ROLES, ROLES[1:] + ROLES[:1]))


def _averaged_degrees(G, target, source, pi_source, alpha0):
    Q = build_Q(pi_source, alpha0)
    F = submatrix_product(G, target, source, Q.T)      # |target| x k
    return F, Q


def support_xi(Q, H, L):
    """Plug-in support threshold: 4 x the three-sigma error of the averaged degrees.

    The per-entry standard deviation of F = G[C, B] Q_B' is
    sqrt(p(1-p) sum_b Q(i, b)^2); dividing by H - L puts it on the membership
    scale the threshold compares against.
    """
    p = min(max(H, 0.0), 1.0)
    sig = np.sqrt(max(p * (1 - p), 1e-12) * (Q**2).sum(axis=1)).max()
    gap = H - L
    if not gap > 0:
        return 1.0
    return float(min(4.0 * 3.0 * sig / gap, 1.0))


def support_recovery(G, pi_hat, alpha0: float, xi: float | None, part: Partition5,
                     return_info: bool = False):
    """Support of significant memberships for every node by degree averaging.

    Block model: each node joins the community it has the most estimated
    neighbors in. Otherwise node x is in community i when its averaged degree
    F(x, i) reaches L + (H - L) 3 xi / 4, with H / L the mean diagonal /
    off-diagonal of the P estimated on the same pair of sets. ``xi=None``
    uses :func:`support_xi`.
    """
    pi_hat = np.asarray(pi_hat, dtype=np.float64)
    k, n = pi_hat.shape
    S = np.zeros((k, n), dtype=np.int8)
    info = {"H": [], "L": [], "xi": []}
    sets = part.sets()
    schedule = [(sets[t], sets[s]) for t, s in SUPPORT_SCHEDULE]
    rest = np.setdiff1d(np.arange(n), part.union())
    if rest.size:
        schedule.append((rest, part.A))
    for target, source in schedule:
        F, Qs = _averaged_degrees(G, target, source, pi_hat[:, source], alpha0)
        if alpha0 == 0:
            best = np.argmax(F, axis=1)                   # first max on ties
            S[best, target] = 1
            continue
        Qt = build_Q(pi_hat[:, target], alpha0)
        P_est = Qt @ F
        H = float(np.mean(np.diag(P_est)))
        L = float(P_est[~np.eye(k, dtype=bool)].mean()) if k > 1 else 0.0
        if not H > L:
            warnings.warn(f"estimated H={H:.4g} <= L={L:.4g}; model not homophilic",
                          NotHomophilic)
        x = xi
        if x is None:
            x = support_xi(Qs, H, L)
        S[:, target] = (F >= L + (H - L) * 0.75 * x).T
        info["H"].append(H)
        info["L"].append(L)
        info["xi"].append(float(x))
    return (S, info) if return_info else S
