"""Rank-k SVD, whitening matrices and the symmetrizers R_AB / R_AC."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import svds

from .errors import DimensionMismatch, RankDeficient
from .moments import ModifiedAdjacency

RANK_TOL = 1e-10
# below this min-dimension a dense LAPACK SVD is cheaper than ARPACK
_DENSE_SVD_MAX = 200


@dataclass
class Whitener:
    W: np.ndarray      # m x k, U / D
    U: np.ndarray      # m x k orthonormal columns
    D: np.ndarray      # k singular values, nonincreasing
    V: np.ndarray      # |X| x k right singular vectors
    scale: float       # |X|^{-1/2}
    rows: np.ndarray   # X
    cols: np.ndarray   # the leaf set being whitened

    @property
    def k(self) -> int:
        return self.D.size


@dataclass
class Symmetrizer:
    R: np.ndarray


def _fix_signs(U, V):
    pivot = np.argmax(np.abs(U), axis=0)
    s = np.sign(U[pivot, np.arange(U.shape[1])])
    s[s == 0] = 1.0
    return U * s, V * s


def k_rank_svd(M, k: int):
    """Top-k singular triplets ``(U, D, V)`` with ``M ~ U diag(D) V'``.

    Large inputs go through ARPACK run to machine precision with a fixed
    starting vector; small ones through LAPACK. Each column of U is signed so
    its largest-magnitude entry is positive.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or min(M.shape) < k or k < 1:
        raise DimensionMismatch(f"cannot take a rank-{k} SVD of shape {M.shape}")
    small = min(M.shape)
    if small <= _DENSE_SVD_MAX or k >= small - 1:
        U, D, Vt = np.linalg.svd(M, full_matrices=False)
        U, D, Vt = U[:, :k], D[:k], Vt[:k]
    else:
        v0 = np.random.default_rng(0x5EED).standard_normal(small)
        U, D, Vt = svds(M, k=k, tol=0, v0=v0, solver="arpack")
        order = np.argsort(D)[::-1]
        U, D, Vt = U[:, order], D[order], Vt[order]
    if not D[0] > 0 or D[-1] / D[0] < RANK_TOL:
        raise RankDeficient(f"sigma_k / sigma_1 = {D[-1] / D[0] if D[0] > 0 else 0.0:.3g}")
    U, V = _fix_signs(U, Vt.T)
    return U, D, V


def compute_whitener(gmod: ModifiedAdjacency, k: int) -> Whitener:
    """Whitener of the leaf set from the rank-k SVD of (|X|^{-1/2} G^a0[X, A])'."""
    nx, na = gmod.m.shape
    if nx < k or na < k:
        raise DimensionMismatch(f"need |X|, |A| >= k (got {nx}, {na}, k={k})")
    scale = 1.0 / np.sqrt(nx)
    U, D, V = k_rank_svd(gmod.m.T * scale, k)
    return Whitener(W=U / D, U=U, D=D, V=V, scale=scale,
                    rows=np.asarray(gmod.rows), cols=np.asarray(gmod.cols))


def compute_symmetrizer(W_B: Whitener, gmod_XB: ModifiedAdjacency,
                        gmod_XA: ModifiedAdjacency, W_A: Whitener) -> Symmetrizer:
    """R_AB = |X|^{-1} W_B' (G^a0[X, B])'_k (G^a0[X, A])_k W_A from the stored factors."""
    if not (np.array_equal(gmod_XB.rows, gmod_XA.rows)
            and np.array_equal(W_B.rows, gmod_XB.rows)
            and np.array_equal(W_A.rows, gmod_XA.rows)):
        raise DimensionMismatch("both whiteners must come from the same X")
    if W_B.k != W_A.k:
        raise DimensionMismatch("whiteners have different ranks")
    # (G_B)'_k / sqrt|X| = U_B D_B V_B',  (G_A)_k / sqrt|X| = V_A D_A U_A'
    left = (W_B.W.T @ W_B.U) * W_B.D
    right = (W_A.D[:, None] * (W_A.U.T @ W_A.W))
    return Symmetrizer(R=left @ (W_B.V.T @ W_A.V) @ right)


def whitening_residual(gmod: ModifiedAdjacency, wh: Whitener) -> float:
    """Max-abs deviation of |X|^{-1} W' M'_k M_k W from the identity."""
    proj = ((wh.W.T @ wh.U) * wh.D) @ wh.V.T       # scale * W' (G^a0)'_k
    prod = proj @ proj.T
    return float(np.abs(prod - np.eye(wh.k)).max())
