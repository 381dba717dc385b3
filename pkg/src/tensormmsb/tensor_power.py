"""Robust tensor power method with adaptive deflation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DimensionMismatch, NoInitializers, NonFiniteIterate, NotUnitVector

CONVERGENCE_TOL = 1e-13
# relative deflation threshold used when xi is not given
XI_FRACTION = 0.01


@dataclass
class EigenPairs:
    lam: np.ndarray            # k eigenvalues, positive
    phi: np.ndarray            # k x k, unit columns
    residual_norm: float = float("nan")
    diagnostics: list = field(default_factory=list)
    xi: float = float("nan")

    @property
    def k(self) -> int:
        return self.lam.size

    def permuted(self, perm) -> "EigenPairs":
        perm = np.asarray(perm)
        return EigenPairs(self.lam[perm], self.phi[:, perm], self.residual_norm,
                          list(self.diagnostics), self.xi)


def apply_Ivv(T, v) -> np.ndarray:
    """T(I, v, v): the vector with entries sum_{q,r} T[p, q, r] v_q v_r."""
    T, v = np.asarray(T), np.asarray(v, dtype=np.float64)
    if T.ndim != 3 or v.shape != (T.shape[1],):
        raise DimensionMismatch("vector length must match the tensor")
    if abs(np.linalg.norm(v) - 1.0) > 1e-9:
        raise NotUnitVector(f"||v|| = {np.linalg.norm(v)}")
    return np.einsum("pqr,q,r->p", T, v, v)


def apply_vvv(T, v) -> float:
    T, v = np.asarray(T), np.asarray(v, dtype=np.float64)
    if T.ndim != 3 or v.shape != (T.shape[0],):
        raise DimensionMismatch("vector length must match the tensor")
    return float(np.einsum("pqr,p,q,r->", T, v, v, v))


def rank_one_sum(lam, phi) -> np.ndarray:
    """sum_i lam_i phi_i (x) phi_i (x) phi_i."""
    return np.einsum("i,pi,qi,ri->pqr", np.asarray(lam), phi, phi, phi)


def default_iteration_count(k: int, gap_ratio: float, c2: float = 10.0, floor: int = 30) -> int:
    """Iteration budget max(30, ceil(c2 (log k + log log(1/gap_ratio)))).

    At gap_ratio == 1 the log-log term is dropped.
    """
    if k < 1 or not (0 < gap_ratio <= 1):
        raise ValueError("need k >= 1 and gap_ratio in (0, 1]")
    inner = math.log(1.0 / gap_ratio)
    loglog = math.log(inner) if inner > 0 else 0.0
    return max(floor, math.ceil(c2 * (math.log(k) + loglog)))


def _normalize_inits(inits, k):
    V = np.asarray(inits, dtype=np.float64)
    if V.ndim == 1:
        V = V[None, :]
    if V.ndim != 2 or V.shape[1] != k:
        raise DimensionMismatch(f"initializers must have {k} columns")
    nrm = np.linalg.norm(V, axis=1)
    keep = np.isfinite(nrm) & (nrm > 0)
    if not keep.any():
        raise NoInitializers("no nonzero initializer")
    return V[keep] / nrm[keep, None], np.flatnonzero(keep)


def tensor_eigen(T, inits, n_iter: int, xi: float | None = None, n_components: int | None = None,
                 tol: float = CONVERGENCE_TOL, backend: str | None = None) -> EigenPairs:
    """Extract eigen-pairs of a (nearly) orthogonally decomposable symmetric tensor.

    For each component every initializer is iterated ``n_iter`` times with
    adaptive deflation of the pairs found so far, the one with the largest
    deflated T(theta, theta, theta) is refined by ``n_iter`` more iterations
    and its value becomes the eigenvalue. ``xi=None`` sets the deflation
    threshold to 1% of the first (largest) eigenvalue found. Trajectories
    whose update vanishes are dropped.
    """
    T = np.asarray(T, dtype=np.float64)
    k = T.shape[0]
    if T.shape != (k, k, k) or not np.all(np.isfinite(T)):
        raise DimensionMismatch("need a finite k x k x k tensor")
    if n_iter < 1:
        raise ValueError("n_iter must be >= 1")
    m = k if n_components is None else n_components
    V, kept = _normalize_inits(inits, k)
    lam = np.zeros(0)
    phi = np.zeros((k, 0))
    diag = []
    xi_eff = np.inf if xi is None else float(xi)
    if xi_eff <= 0:
        raise ValueError("xi must be positive")
    for i in range(m):
        th, alive, steps = kernels.power_iterate(T, V, lam, phi, xi_eff, n_iter, tol, backend)
        if not alive.any():
            raise NonFiniteIterate(f"every trajectory vanished for component {i}")
        scores = np.full(V.shape[0], -np.inf)
        scores[alive] = kernels.deflated_values(T, th[alive], lam, phi, xi_eff)
        best = int(np.argmax(scores))
        ref, ok, ref_steps = kernels.power_iterate(T, th[best:best + 1], lam, phi, xi_eff,
                                                   n_iter, tol, backend)
        if not ok[0]:
            raise NonFiniteIterate(f"refinement vanished for component {i}")
        v = ref[0]
        val = float(kernels.deflated_values(T, v, lam, phi, xi_eff)[0])
        if val < 0:
            v, val = -v, -val
        lam = np.append(lam, val)
        phi = np.column_stack([phi, v])
        diag.append({
            "component": i,
            "init_index": int(kept[best]),
            "score": float(scores[best]),
            "alive": int(alive.sum()),
            "mean_steps": float(steps[alive].mean()),
            "refine_steps": int(ref_steps[0]),
        })
        if xi is None and i == 0:
            xi_eff = XI_FRACTION * val if val > 0 else np.inf
    pairs = EigenPairs(lam=lam, phi=phi, diagnostics=diag, xi=float(xi_eff))
    pairs.residual_norm = residual_norm(T, pairs)
    return pairs


def tensor_spectral_norm(T, restarts: int = 20, n_iter: int = 100, seed: int = 0) -> float:
    """Lower estimate of max_{||u||=1} |T(u, u, u)| by restarted power iterations."""
    T = np.asarray(T, dtype=np.float64)
    k = T.shape[0]
    Ts = (T + T.transpose(0, 2, 1) + T.transpose(1, 0, 2)
          + T.transpose(1, 2, 0) + T.transpose(2, 0, 1) + T.transpose(2, 1, 0)) / 6.0
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((restarts, k))
    U = np.vstack([U, np.eye(k)])
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    best = np.abs(np.einsum("pqr,lp,lq,lr->l", Ts, U, U, U)).max()
    for _ in range(n_iter):
        W = np.einsum("pqr,lq,lr->lp", Ts, U, U)
        nrm = np.linalg.norm(W, axis=1)
        ok = nrm > 0
        if not ok.any():
            break
        U = W[ok] / nrm[ok, None]
        best = max(best, np.abs(np.einsum("pqr,lp,lq,lr->l", Ts, U, U, U)).max())
    return float(best)


def residual_norm(T, pairs: EigenPairs, restarts: int = 20) -> float:
    """Spectral-norm estimate of T - sum_j lam_j phi_j^{(x)3}."""
    R = np.asarray(T) - rank_one_sum(pairs.lam, pairs.phi)
    if not np.any(R):
        return 0.0
    return tensor_spectral_norm(R, restarts=restarts)
