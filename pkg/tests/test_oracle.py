import numpy as np
import pytest

from tensormmsb.errors import CapExceeded
from tensormmsb.model import (
    MmsbModel,
    labels_to_onehot,
    sample_dirichlet,
    sample_graph,
)
from tensormmsb.moments import centered_threestar
from tensormmsb.oracle import (
    centered_population_tensor,
    dirichlet_moment_matrix,
    dirichlet_third_moment,
    exact_block_tensor,
    exact_F,
    exact_F_loop,
    exact_moments,
    expected_graph,
    expected_graph_loop,
    psi_matrix,
)
from tensormmsb.tensor_power import tensor_eigen


def test_exact_F_examples():
    pi = np.eye(3)
    assert np.array_equal(exact_F(pi, np.eye(3)), np.eye(3))
    pi = np.array([[1.0, 0.5], [0.0, 0.5]])
    P = np.array([[0.6, 0.1], [0.1, 0.6]])
    assert np.allclose(exact_F(pi, P), [[0.6, 0.1], [0.35, 0.35]], atol=1e-15)


def test_exact_F_vs_loop():
    rng = np.random.default_rng(0)
    pi = sample_dirichlet([0.5, 0.7, 1.1], 40, rng)
    P = rng.random((3, 3))
    nodes = np.arange(5, 30, 3)
    assert np.abs(exact_F(pi, P, nodes) - exact_F_loop(pi, P, nodes)).max() <= 1e-14


def test_exact_block_tensor_rank_one_and_cap():
    FA, FB, FC = np.ones((2, 1)), 2 * np.ones((3, 1)), np.ones((1, 1))
    T = exact_block_tensor(FA, FB, FC, [0.7])
    assert np.allclose(T, 1.4)
    with pytest.raises(CapExceeded):
        exact_block_tensor(np.ones((200, 1)), np.ones((200, 1)), np.ones((200, 1)), [1.0], cap=10**6)


def test_exact_block_tensor_orthonormal_eigenvalues():
    # orthonormal F columns and uniform alpha_hat: whitening by sqrt(k) F gives lambda = sqrt(k)
    k = 4
    F, _ = np.linalg.qr(np.random.default_rng(1).standard_normal((k, k)))
    ah = np.full(k, 1 / k)
    T = exact_block_tensor(F, F, F, ah)
    W = F * np.sqrt(k)            # W' F diag(ah) F' W = I
    Tw = np.einsum("abc,ap,bq,cr->pqr", T, W, W, W)
    pairs = tensor_eigen(Tw, np.eye(k), 40)
    assert np.allclose(pairs.lam, np.sqrt(k), atol=1e-10)


def test_exact_block_tensor_monte_carlo():
    # raw 3-star averages over block-model heads converge to the block tensor
    k, n_heads = 2, 10**5
    ah = np.array([0.4, 0.6])
    P = np.array([[0.7, 0.2], [0.2, 0.5]])
    leaves = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]).T      # a, b, c memberships
    F = exact_F(leaves, P)
    expect = exact_block_tensor(F[:1], F[1:2], F[2:], ah)[0, 0, 0]
    rng = np.random.default_rng(2)
    z = rng.choice(k, size=n_heads, p=ah)
    probs = F[:, z].T                                # heads x leaves
    hits = rng.random(probs.shape) < probs
    est = np.all(hits, axis=1).mean()
    sd = np.sqrt(expect * (1 - expect) / n_heads)
    assert abs(est - expect) <= 3 * sd


def test_dirichlet_moment_matrix_examples():
    assert np.allclose(dirichlet_moment_matrix([1.0, 1.0]), [[1 / 3, 1 / 6], [1 / 6, 1 / 3]])
    ah = np.full(3, 1 / 3)
    M = dirichlet_moment_matrix(1e6 * ah)
    assert np.abs(M - np.outer(ah, ah)).max() <= 1e-5


def test_dirichlet_moment_matrix_monte_carlo():
    alpha = np.array([0.4, 1.2, 0.9])
    pi = sample_dirichlet(alpha, 10**6, 3)
    assert np.abs(pi @ pi.T / pi.shape[1] - dirichlet_moment_matrix(alpha)).max() <= 0.005


def test_third_moment_against_sampling():
    alpha = np.array([0.5, 0.8, 0.3])
    pi = sample_dirichlet(alpha, 4 * 10**5, 4)
    emp = np.einsum("pi,qi,ri->pqr", pi, pi, pi) / pi.shape[1]
    assert np.abs(emp - dirichlet_third_moment(alpha)).max() <= 0.003


def test_centered_combination_is_diagonal():
    alpha = np.array([0.3, 0.5, 0.2, 0.9])
    T = centered_population_tensor(alpha)
    D = np.zeros((4, 4, 4))
    D[np.arange(4), np.arange(4), np.arange(4)] = alpha / alpha.sum()
    assert np.abs(T - D).max() <= 1e-14


def test_psi_matrix_examples():
    rng = np.random.default_rng(5)
    ah = np.array([0.2, 0.3, 0.5])
    pi = sample_dirichlet(ah * 2.0, 7, rng)
    assert np.allclose(psi_matrix(pi, ah, 0.0), pi / np.sqrt(ah)[:, None])
    single = psi_matrix(ah[:, None], ah, 3.0)
    assert np.allclose(single[:, 0], ah / np.sqrt(ah))


def test_psi_whitening_identity():
    alpha = np.array([0.3, 0.5, 0.4])
    ah = alpha / alpha.sum()
    pi = sample_dirichlet(alpha, 10**5, 6)
    psi = psi_matrix(pi, ah, alpha.sum())
    assert np.linalg.norm(psi @ psi.T / pi.shape[1] - np.eye(3), 2) <= 0.05


def test_expected_graph_examples():
    labels = np.array([0, 0, 1, 1, 1])
    pi = labels_to_onehot(labels, 2)
    E = expected_graph(pi, np.eye(2))
    ref = (labels[:, None] == labels[None, :]).astype(float)
    np.fill_diagonal(ref, 0)
    assert np.array_equal(E, ref)
    rng = np.random.default_rng(7)
    pi = sample_dirichlet([0.5, 0.5], 3, rng)
    P = rng.random((2, 2))
    assert np.abs(expected_graph(pi, P) - expected_graph_loop(pi, P)).max() <= 1e-15


def test_expected_graph_monte_carlo():
    rng = np.random.default_rng(8)
    pi = sample_dirichlet([0.6, 0.6], 12, rng)
    P = np.array([[0.7, 0.2], [0.2, 0.5]])
    m = MmsbModel(alpha=[0.6, 0.6], P=P, n=12)
    reps = 10**4
    acc = np.zeros((12, 12))
    for _ in range(reps):
        acc += sample_graph(m, pi, rng).adj
    E = expected_graph(pi, P)
    sd = np.sqrt(E * (1 - E) / reps)
    assert np.all(np.abs(acc / reps - E) <= 3.5 * sd + 1e-12)


def test_block_tensor_equals_centered_formula_at_zero():
    # heads with exact proportions; per head the expected 3-star factorizes
    k = 3
    P = np.array([[0.6, 0.1, 0.2], [0.1, 0.5, 0.1], [0.2, 0.1, 0.7]])
    rng = np.random.default_rng(9)
    leaves = {s: labels_to_onehot(rng.integers(0, k, 6), k) for s in "ABC"}
    counts = np.array([5, 3, 2])
    heads = labels_to_onehot(np.repeat(np.arange(k), counts), k)
    rows = {s: heads.T @ P @ leaves[s] for s in "ABC"}       # E[G_{y, S}]
    T = centered_threestar(rows["A"], rows["B"], rows["C"], 0.0, backend="numpy")
    F = {s: exact_F(leaves[s], P) for s in "ABC"}
    ref = exact_block_tensor(F["A"], F["B"], F["C"], counts / counts.sum())
    assert np.abs(T - ref).max() <= 1e-12


def test_exact_moments_orthogonal_decomposition():
    k, n = 3, 600
    rng = np.random.default_rng(10)
    alpha = np.array([0.5, 0.3, 0.4])
    pi = sample_dirichlet(alpha, n, rng)
    P = rng.random((k, k)) * 0.5 + np.eye(k) * 0.4
    idx = rng.permutation(n)
    A, B, C, X = idx[:120], idx[120:240], idx[240:360], idx[360:480]
    ex = exact_moments(pi, P, alpha, A, B, C, X)
    T = ex.expected_tensor
    assert np.abs(T - T.transpose(1, 0, 2)).max() <= 1e-10
    assert np.abs(ex.components.T @ ex.components - np.eye(k)).max() <= 1e-10
    ref = np.einsum("i,pi,qi,ri->pqr", ex.eigenvalues, ex.components, ex.components, ex.components)
    assert np.abs(T - ref).max() <= 1e-10
