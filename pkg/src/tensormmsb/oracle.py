"""Exact-moment and brute-force references for testing.

Everything here is written from the model definitions with plain numpy and
loops; nothing calls into the estimation code, so results can be diffed
against it.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

TENSOR_CAP = 10**6


def exact_F(pi, P, nodes=None) -> np.ndarray:
    """F_S = Pi_S' P', one row per node of S."""
    pi = np.asarray(pi, dtype=np.float64)
    if nodes is not None:
        pi = pi[:, np.asarray(nodes)]
    return pi.T @ np.asarray(P, dtype=np.float64).T


def exact_F_loop(pi, P, nodes=None) -> np.ndarray:
    pi = np.asarray(pi, dtype=np.float64)
    P = np.asarray(P, dtype=np.float64)
    nodes = range(pi.shape[1]) if nodes is None else list(nodes)
    k = P.shape[0]
    out = np.zeros((len(nodes), k))
    for r, u in enumerate(nodes):
        for i in range(k):
            s = 0.0
            for j in range(k):
                s += pi[j, u] * P[i, j]
            out[r, i] = s
    return out


def exact_block_tensor(FA, FB, FC, alpha_hat, cap: int = TENSOR_CAP) -> np.ndarray:
    """sum_i alpha_hat_i (F_A)_i (x) (F_B)_i (x) (F_C)_i, materialized."""
    FA, FB, FC = (np.asarray(F, dtype=np.float64) for F in (FA, FB, FC))
    size = FA.shape[0] * FB.shape[0] * FC.shape[0]
    if size > cap:
        # local import keeps this module free of estimation code
        from .errors import CapExceeded
        raise CapExceeded(f"tensor of {size} entries exceeds cap {cap}")
    return np.einsum("i,ai,bi,ci->abc", np.asarray(alpha_hat, dtype=np.float64), FA, FB, FC)


def dirichlet_moment_matrix(alpha) -> np.ndarray:
    """E[pi pi'] = (diag(a_hat) + alpha0 a_hat a_hat') / (alpha0 + 1)."""
    alpha = np.asarray(alpha, dtype=np.float64)
    a0 = alpha.sum()
    ah = alpha / a0
    return (np.diag(ah) + a0 * np.outer(ah, ah)) / (a0 + 1.0)


def dirichlet_third_moment(alpha) -> np.ndarray:
    """E[pi (x) pi (x) pi] from rising factorials of the repeated indices."""
    alpha = np.asarray(alpha, dtype=np.float64)
    k = alpha.size
    a0 = alpha.sum()
    denom = a0 * (a0 + 1.0) * (a0 + 2.0)
    T = np.empty((k, k, k))
    for idx in itertools.product(range(k), repeat=3):
        num = 1.0
        for i in set(idx):
            c = idx.count(i)
            for r in range(c):
                num *= alpha[i] + r
        T[idx] = num / denom
    return T


def centered_population_tensor(alpha) -> np.ndarray:
    """Centered third-order combination evaluated on exact Dirichlet moments.

    Uses the combination with the overall factor 1/2 so that the result is
    diag(alpha_hat); see tests for the unhalved value 2 diag(alpha_hat).
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    a0 = alpha.sum()
    m1 = alpha / a0
    m2 = dirichlet_moment_matrix(alpha)
    m3 = dirichlet_third_moment(alpha)
    T = (a0 + 1.0) * (a0 + 2.0) * m3 + 2.0 * a0**2 * np.einsum("p,q,r->pqr", m1, m1, m1)
    T -= a0 * (a0 + 1.0) * (np.einsum("pq,r->pqr", m2, m1) + np.einsum("pr,q->pqr", m2, m1)
                            + np.einsum("p,qr->pqr", m1, m2))
    return 0.5 * T


def psi_matrix(piX, alpha_hat, alpha0: float) -> np.ndarray:
    """Psi_X = diag(a_hat^-1/2) (sqrt(a0+1) Pi_X - (sqrt(a0+1) - 1) a_hat 1')."""
    piX = np.asarray(piX, dtype=np.float64)
    ah = np.asarray(alpha_hat, dtype=np.float64)
    s = np.sqrt(alpha0 + 1.0)
    return (s * piX - (s - 1.0) * ah[:, None]) / np.sqrt(ah)[:, None]


def expected_graph(pi, P) -> np.ndarray:
    """E[G | Pi] = Pi' P Pi with the diagonal zeroed."""
    pi = np.asarray(pi, dtype=np.float64)
    E = pi.T @ np.asarray(P, dtype=np.float64) @ pi
    np.fill_diagonal(E, 0.0)
    return E


def expected_graph_loop(pi, P) -> np.ndarray:
    pi = np.asarray(pi, dtype=np.float64)
    P = np.asarray(P, dtype=np.float64)
    k, n = pi.shape
    E = np.zeros((n, n))
    for u in range(n):
        for v in range(n):
            if u == v:
                continue
            s = 0.0
            for i in range(k):
                for j in range(k):
                    s += pi[i, u] * P[i, j] * pi[j, v]
            E[u, v] = s
    return E


def raw_threestar_loop(adj, X, A, B, C) -> np.ndarray:
    """|X|^-1 sum_x G[x,a] G[x,b] G[x,c] by scalar loops."""
    adj = np.asarray(adj)
    T = np.zeros((len(A), len(B), len(C)))
    for ia, a in enumerate(A):
        for ib, b in enumerate(B):
            for ic, c in enumerate(C):
                s = 0
                for x in X:
                    s += int(adj[x, a]) * int(adj[x, b]) * int(adj[x, c])
                T[ia, ib, ic] = s
    return T / len(X)


def multilinear(T, WA, WB, WC) -> np.ndarray:
    """T(WA, WB, WC) for a materialized tensor."""
    return np.einsum("abc,ap,bq,cr->pqr", T, WA, WB, WC)


def whiten_svd(M, k):
    """W = U_k / D_k from a full LAPACK SVD of the (leaves x |X|) matrix M."""
    U, D, _ = np.linalg.svd(M, full_matrices=False)
    return U[:, :k] / D[:k]


@dataclass
class ExactMoments:
    FA: np.ndarray
    FB: np.ndarray
    FC: np.ndarray
    expected_gmod: dict         # leaf set name -> |X|^-1/2 E[(G^a0)'] (idealized)
    W: dict                     # leaf set name -> whitening matrix
    R_AB: np.ndarray
    R_AC: np.ndarray
    expected_tensor: np.ndarray  # whitened, k x k x k
    psiX: np.ndarray
    components: np.ndarray      # k x k, unit columns W_A' F_A diag(a_hat^1/2)
    eigenvalues: np.ndarray     # a_hat^-1/2


def exact_moments(pi, P, alpha, A, B, C, X, seed: int = 0) -> ExactMoments:
    """Noiseless whitened moments with an idealized X sample.

    The expected modified adjacency is |X|^-1/2 E[(G^a0)'] = F_S diag(a_hat^1/2) Q
    where Q (k x |X|) has orthonormal rows, i.e. |X|^-1 Psi_X Psi_X' is exactly
    the identity. Whitening is then exact and the whitened tensor equals
    sum_i a_hat_i^-1/2 phi_i^(x)3 to rounding.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    P = np.asarray(P, dtype=np.float64)
    k = P.shape[0]
    a0 = alpha.sum()
    ah = alpha / a0
    F = {s: exact_F(pi, P, nodes) for s, nodes in zip("ABC", (A, B, C))}
    rng = np.random.default_rng(seed)
    Qx, _ = np.linalg.qr(rng.standard_normal((len(X), k)))
    Q = Qx.T
    M = {s: F[s] * np.sqrt(ah) @ Q for s in "ABC"}
    W = {s: whiten_svd(M[s], k) for s in "ABC"}
    R_AB = W["B"].T @ M["B"] @ M["A"].T @ W["A"]
    R_AC = W["C"].T @ M["C"] @ M["A"].T @ W["A"]
    a = W["A"].T @ F["A"]
    b = (W["B"] @ R_AB).T @ F["B"]
    c = (W["C"] @ R_AC).T @ F["C"]
    T = np.einsum("i,pi,qi,ri->pqr", ah, a, b, c)
    comps = a * np.sqrt(ah)
    psi = psi_matrix(np.asarray(pi)[:, np.asarray(X)], ah, a0)
    return ExactMoments(FA=F["A"], FB=F["B"], FC=F["C"], expected_gmod=M, W=W,
                        R_AB=R_AB, R_AC=R_AC, expected_tensor=T, psiX=psi,
                        components=comps, eigenvalues=ah**-0.5)
