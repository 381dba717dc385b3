"""Node partitioning and centered first/third order graph moments."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .errors import (
    CapExceeded,
    DimensionMismatch,
    EmptyPartition,
    OverlappingSets,
    TooFewNodes,
)

ROLES = ("A", "B", "C", "X", "Y")
RAW_THREESTAR_CAP = 10**6
_CHUNK = 2048


@dataclass(frozen=True)
class Partition5:
    """Disjoint node sets: X feeds the whiteners, Y heads the 3-stars, A/B/C are leaves."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    X: np.ndarray
    Y: np.ndarray

    def sets(self) -> dict:
        return {r: getattr(self, r) for r in ROLES}

    def swap(self, r1: str, r2: str) -> "Partition5":
        return replace(self, **{r1: getattr(self, r2), r2: getattr(self, r1)})

    def union(self) -> np.ndarray:
        return np.concatenate([getattr(self, r) for r in ROLES])

    def validate(self, n: int, k: int = 1) -> None:
        seen = np.zeros(n, dtype=np.int64)
        for r in ROLES:
            s = getattr(self, r)
            if s.size < max(k, 1):
                raise EmptyPartition(f"set {r} has {s.size} nodes, need >= {max(k, 1)}")
            if s.min() < 0 or s.max() >= n:
                raise DimensionMismatch(f"set {r} indexes outside [0, {n})")
            np.add.at(seen, s, 1)
        if seen.max() > 1:
            raise OverlappingSets("partition sets overlap")


@dataclass
class ModifiedAdjacency:
    """Centered adjacency block sqrt(a0+1) G[X, A] - (sqrt(a0+1) - 1) 1 mu'."""

    m: np.ndarray
    alpha0: float
    mu: np.ndarray
    rows: np.ndarray
    cols: np.ndarray


def adjacency(G) -> np.ndarray:
    return G.adj if hasattr(G, "adj") else np.asarray(G)


def submatrix(G, rows, cols, dtype=np.float64) -> np.ndarray:
    adj = adjacency(G)
    return adj[np.ix_(np.asarray(rows), np.asarray(cols))].astype(dtype)


def submatrix_product(G, rows, cols, M) -> np.ndarray:
    """``G[rows][:, cols] @ M`` computed over row chunks.

    ``rows`` / ``cols`` may be None for all nodes. Keeps the float copy of the
    adjacency bounded to ``_CHUNK`` rows.
    """
    adj = adjacency(G)
    rows = np.arange(adj.shape[0]) if rows is None else np.asarray(rows)
    M = np.asarray(M, dtype=np.float64)
    out = np.empty((rows.size,) + M.shape[1:], dtype=np.float64)
    for s in range(0, rows.size, _CHUNK):
        r = rows[s:s + _CHUNK]
        blk = adj[r] if cols is None else adj[np.ix_(r, np.asarray(cols))]
        out[s:s + _CHUNK] = blk.astype(np.float64) @ M
    return out


def _disjoint(*sets) -> bool:
    allnodes = np.concatenate([np.asarray(s).ravel() for s in sets])
    return np.unique(allnodes).size == allnodes.size


def partition_nodes(n: int, rng, fractions=(0.2,) * 5, k: int = 1) -> Partition5:
    """Uniformly random disjoint sets A, B, C, X, Y with the requested fractions of n."""
    fractions = np.asarray(fractions, dtype=np.float64)
    if fractions.size != 5 or np.any(fractions <= 0) or fractions.sum() > 1 + 1e-9:
        raise ValueError("need 5 positive fractions summing to at most 1")
    sizes = np.floor(fractions * n + 1e-9).astype(np.int64)
    if sizes.min() < max(k, 1):
        raise TooFewNodes(f"n={n} gives a set of {sizes.min()} nodes with k={k}")
    perm = np.random.default_rng(rng).permutation(n)
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    parts = {r: np.sort(perm[bounds[i]:bounds[i + 1]]) for i, r in enumerate(ROLES)}
    return Partition5(**parts)


def edge_mean(G, X, A) -> np.ndarray:
    """Average neighborhood vector of the nodes in X restricted to columns A."""
    if not _disjoint(X, A):
        raise OverlappingSets("X and A must be disjoint")
    adj, X, A = adjacency(G), np.asarray(X), np.asarray(A)
    total = np.zeros(A.size, dtype=np.int64)
    for s in range(0, X.size, _CHUNK):
        total += adj[np.ix_(X[s:s + _CHUNK], A)].sum(axis=0, dtype=np.int64)
    return total / X.size


def modified_adjacency(G, X, A, alpha0: float) -> ModifiedAdjacency:
    if not _disjoint(X, A):
        raise OverlappingSets("X and A must be disjoint")
    if alpha0 < 0:
        raise ValueError("alpha0 must be nonnegative")
    raw = submatrix(G, X, A)
    mu = raw.mean(axis=0)
    s = np.sqrt(alpha0 + 1.0)
    m = raw if alpha0 == 0 else s * raw - (s - 1.0) * mu[None, :]
    return ModifiedAdjacency(m=m, alpha0=float(alpha0), mu=mu,
                             rows=np.asarray(X), cols=np.asarray(A))


def raw_threestar(G, X, A, B, C, cap: int = RAW_THREESTAR_CAP) -> np.ndarray:
    """Materialized 3-star count tensor; test-scale only."""
    if len(A) * len(B) * len(C) > cap:
        raise CapExceeded(f"|A||B||C| = {len(A) * len(B) * len(C)} exceeds cap {cap}")
    ga, gb, gc = (submatrix(G, X, S) for S in (A, B, C))
    return np.einsum("xa,xb,xc->abc", ga, gb, gc) / len(X)


def symmetrize(T: np.ndarray) -> np.ndarray:
    """Average over the 6 index permutations, exactly symmetric in floating point."""
    S = (T + T.transpose(0, 2, 1) + T.transpose(1, 0, 2)
         + T.transpose(1, 2, 0) + T.transpose(2, 0, 1) + T.transpose(2, 1, 0)) / 6.0
    idx = np.sort(np.indices(S.shape).reshape(3, -1), axis=0)
    return S[idx[0], idx[1], idx[2]].reshape(S.shape)


def centered_threestar(a, b, c, alpha0: float, backend: str | None = None) -> np.ndarray:
    """Centered 3-star tensor from per-head projected neighborhood rows.

    ``a``, ``b``, ``c`` hold one row per head node (already projected to k
    dimensions). The means of each are taken over the same head set. The
    combination is halved so that its population value under Dir(alpha)
    memberships is sum_i alpha_hat_i a_i (x) b_i (x) c_i, which at
    alpha0 = 0 is the plain 3-star average.
    """
    ny = a.shape[0]
    if ny == 0:
        raise EmptyPartition("no head nodes")
    s3 = kernels.threestar_accumulate(a, b, c, backend=backend) / ny
    T = 0.5 * (alpha0 + 1.0) * (alpha0 + 2.0) * s3
    if alpha0 != 0:
        ma, mb, mc = a.mean(axis=0), b.mean(axis=0), c.mean(axis=0)
        sab, sac, sbc = a.T @ b / ny, a.T @ c / ny, b.T @ c / ny
        T += alpha0**2 * np.einsum("p,q,r->pqr", ma, mb, mc)
        T -= 0.5 * alpha0 * (alpha0 + 1.0) * (
            np.einsum("pq,r->pqr", sab, mc)
            + np.einsum("pr,q->pqr", sac, mb)
            + np.einsum("p,qr->pqr", ma, sbc))
    return T


def whitened_threestar(G, part: Partition5, alpha0: float, W_A, WB_RAB, WC_RAC,
                       symmetric: bool = True, backend: str | None = None) -> np.ndarray:
    """Centered 3-star tensor from Y to (A, B, C) under the multilinear map (W_A, W_B R_AB, W_C R_AC).

    Works entirely in k dimensions: each head's three neighborhood vectors are
    projected first, so the |A| x |B| x |C| tensor is never formed.
    """
    W_A, WB_RAB, WC_RAC = (np.asarray(W) for W in (W_A, WB_RAB, WC_RAC))
    k = W_A.shape[1]
    if WB_RAB.shape[1] != k or WC_RAC.shape[1] != k:
        raise DimensionMismatch("whiteners must share the column count")
    for W, S in ((W_A, part.A), (WB_RAB, part.B), (WC_RAC, part.C)):
        if W.shape[0] != len(S):
            raise DimensionMismatch("whitener rows must match its leaf set")
    if not _disjoint(part.Y, part.A, part.B, part.C):
        raise OverlappingSets("Y must be disjoint from A, B, C")
    a = submatrix_product(G, part.Y, part.A, W_A)
    b = submatrix_product(G, part.Y, part.B, WB_RAB)
    c = submatrix_product(G, part.Y, part.C, WC_RAC)
    T = centered_threestar(a, b, c, alpha0, backend=backend)
    return symmetrize(T) if symmetric else T
