"""Ground-truth model types and synthetic graph generation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidPrior,
    InvalidProbability,
    NonPositiveAlpha,
)

# rows of the edge-probability matrix materialized at once by sample_graph
_SAMPLE_BLOCK = 512


@dataclass
class MmsbModel:
    """Mixed membership (or block) model parameters.

    ``alpha0 == 0`` encodes the stochastic block model; ``alpha`` then holds
    the community prior (a probability vector) instead of Dirichlet
    concentrations.
    """

    alpha: np.ndarray
    P: np.ndarray
    n: int
    alpha0: float | None = None
    directed: bool = True

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=np.float64).ravel()
        self.P = np.atleast_2d(np.asarray(self.P, dtype=np.float64))
        k = self.alpha.size
        if k < 1 or self.n < 1:
            raise DimensionMismatch("need k >= 1 and n >= 1")
        if self.P.shape != (k, k):
            raise DimensionMismatch(f"P has shape {self.P.shape}, expected {(k, k)}")
        if np.any(self.P < 0) or np.any(self.P > 1):
            raise InvalidProbability("connectivity entries must lie in [0, 1]")
        if self.alpha0 is None:
            self.alpha0 = float(self.alpha.sum())
        if self.alpha0 == 0:
            if np.any(self.alpha < 0) or abs(self.alpha.sum() - 1.0) > 1e-9:
                raise InvalidPrior("block-model prior must be a probability vector")
        else:
            if np.any(self.alpha <= 0):
                raise NonPositiveAlpha("Dirichlet parameters must be positive")
            if abs(self.alpha.sum() - self.alpha0) > 1e-9 * max(1.0, self.alpha0):
                raise InvalidPrior("alpha0 must equal sum(alpha)")

    @property
    def k(self) -> int:
        return self.alpha.size

    @property
    def alpha_hat(self) -> np.ndarray:
        if self.alpha0 == 0:
            return self.alpha.copy()
        return self.alpha / self.alpha0

    def sample_memberships(self, rng) -> np.ndarray:
        if self.alpha0 == 0:
            return sample_block_labels(self.alpha, self.n, rng)
        return sample_dirichlet(self.alpha, self.n, rng)


@dataclass
class Graph:
    """Dense 0/1 adjacency matrix without self-loops."""

    adj: np.ndarray
    directed: bool = True
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.adj = np.asarray(self.adj)
        if self.adj.ndim != 2 or self.adj.shape[0] != self.adj.shape[1]:
            raise DimensionMismatch("adjacency must be square")
        if self.adj.dtype != np.uint8:
            self.adj = (self.adj != 0).astype(np.uint8)

    @property
    def n(self) -> int:
        return self.adj.shape[0]

    def n_edges(self) -> int:
        total = int(self.adj.sum(dtype=np.int64))
        return total if self.directed else total // 2


def sample_dirichlet(alpha, n: int, rng) -> np.ndarray:
    """Draw ``n`` membership vectors from Dir(alpha), returned as a k x n matrix.

    Each column is a vector of independent Gamma(alpha_i, 1) draws divided by
    its sum. For alpha_i < 1 the gamma draws are taken in log space
    (``log G(a) = log G(a + 1) + log(U) / a``) so that columns never
    underflow to all zeros.
    """
    alpha = np.asarray(alpha, dtype=np.float64).ravel()
    if alpha.size == 0 or np.any(~(alpha > 0)):
        raise NonPositiveAlpha("all Dirichlet parameters must be positive")
    rng = np.random.default_rng(rng)
    k = alpha.size
    if k == 1:
        return np.ones((1, n))
    small = alpha < 1.0
    boosted = np.where(small, alpha + 1.0, alpha)
    log_g = np.log(rng.gamma(boosted, 1.0, size=(n, k)))
    if small.any():
        u = rng.random(size=(n, k))
        log_g[:, small] += np.log(u[:, small]) / alpha[small]
    log_g -= log_g.max(axis=1, keepdims=True)
    g = np.exp(log_g)
    pi = g / g.sum(axis=1, keepdims=True)
    return np.ascontiguousarray(pi.T)


def sample_block_labels(alpha_hat, n: int, rng) -> np.ndarray:
    """One-hot k x n membership matrix with community j drawn w.p. alpha_hat[j]."""
    alpha_hat = np.asarray(alpha_hat, dtype=np.float64).ravel()
    if np.any(alpha_hat < 0) or abs(alpha_hat.sum() - 1.0) > 1e-9:
        raise InvalidPrior("alpha_hat must be a probability vector")
    rng = np.random.default_rng(rng)
    labels = rng.choice(alpha_hat.size, size=n, p=alpha_hat / alpha_hat.sum())
    return labels_to_onehot(labels, alpha_hat.size)


def labels_to_onehot(labels, k: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    pi = np.zeros((k, labels.size))
    pi[labels, np.arange(labels.size)] = 1.0
    return pi


def sample_graph(model: MmsbModel, pi: np.ndarray, rng) -> Graph:
    """Bernoulli(pi_u' P pi_v) edges for every ordered pair u != v.

    Undirected graphs draw the u < v entries and mirror them.
    """
    pi = np.asarray(pi, dtype=np.float64)
    if pi.ndim != 2 or pi.shape[0] != model.k:
        raise DimensionMismatch(f"membership matrix must have {model.k} rows")
    n = pi.shape[1]
    rng = np.random.default_rng(rng)
    adj = np.empty((n, n), dtype=np.uint8)
    right = model.P @ pi
    for i0 in range(0, n, _SAMPLE_BLOCK):
        i1 = min(n, i0 + _SAMPLE_BLOCK)
        prob = pi[:, i0:i1].T @ right
        adj[i0:i1] = rng.random(prob.shape) < prob
        if not model.directed:
            adj[i0:i1, :i0] = adj[:i0, i0:i1].T
            blk = adj[i0:i1, i0:i1]
            lower = np.tril_indices(i1 - i0, -1)
            blk[lower] = blk.T[lower]
    np.fill_diagonal(adj, 0)
    return Graph(adj, directed=model.directed)


def make_homogeneous(k: int, p: float, q: float):
    """Connectivity with ``p`` on the diagonal and ``q`` elsewhere, uniform prior."""
    if not (0.0 <= q <= p <= 1.0):
        raise InvalidProbability(f"need 0 <= q <= p <= 1, got p={p}, q={q}")
    P = np.full((k, k), float(q))
    np.fill_diagonal(P, float(p))
    return P, np.full(k, 1.0 / k)


def homogeneous_model(k, n, p, q, alpha0=0.0, directed=True) -> MmsbModel:
    P, alpha_hat = make_homogeneous(k, p, q)
    alpha = alpha_hat if alpha0 == 0 else alpha0 * alpha_hat
    return MmsbModel(alpha=alpha, P=P, n=n, alpha0=float(alpha0), directed=directed)


def check_membership(pi: np.ndarray, atol: float = 1e-12) -> bool:
    pi = np.asarray(pi)
    return bool(np.all(pi >= 0) and np.allclose(pi.sum(axis=0), 1.0, rtol=0, atol=atol))
