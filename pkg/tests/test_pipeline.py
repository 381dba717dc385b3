import math
import warnings

import numpy as np
import pytest

from tensormmsb._accel import HAVE_NUMBA
from tensormmsb.errors import AssumptionWarning, DimensionMismatch, TooFewNodes
from tensormmsb.model import MmsbModel, homogeneous_model, sample_graph
from tensormmsb.pipeline import FitConfig, check_assumptions, evaluate, fit
from tensormmsb.reconstruction import ModelEstimate
from tensormmsb.tensor_power import EigenPairs


def simulate(k, n, p, q, alpha0=0.0, seed=0, directed=True):
    m = homogeneous_model(k, n, p, q, alpha0, directed=directed)
    rng = np.random.default_rng(seed)
    pi = m.sample_memberships(rng)
    return m, pi, sample_graph(m, pi, rng)


def quiet_fit(G, cfg):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return fit(G, cfg)


def fake_estimate(pi, P, alpha0=0.0, support=True):
    k, n = pi.shape
    return ModelEstimate(pi_hat=pi.copy(), p_hat=P.copy(), alpha_hat=np.full(k, 1 / k),
                         eigen=EigenPairs(lam=np.ones(k), phi=np.eye(k)), tau=0.5, xi=None,
                         support=(pi >= 0.5).astype(np.uint8) if support else None,
                         p_hat_raw=P.copy(), pi_tilde=pi.copy(), partition=None,
                         alpha0=alpha0, diagnostics={})


@pytest.fixture(scope="module")
def block_k2():
    return simulate(2, 1000, 0.9, 0.05, seed=1)


def test_fit_block_k2_exact(block_k2):
    m, pi, G = block_k2
    est = quiet_fit(G, FitConfig(k=2, seed=0))
    met = evaluate(est, pi, m.P)
    assert met.accuracy == 1.0
    assert met.err_P <= 0.02
    assert abs(est.alpha_hat.sum() - 1.0) <= 0.1
    assert est.pi_hat.shape == (2, 1000) and est.support.shape == (2, 1000)


def test_fit_deterministic(block_k2):
    _, _, G = block_k2
    a = quiet_fit(G, FitConfig(k=2, seed=3))
    b = quiet_fit(G, FitConfig(k=2, seed=3))
    assert np.array_equal(a.pi_hat, b.pi_hat)
    assert np.array_equal(a.p_hat, b.p_hat)
    assert np.array_equal(a.eigen.lam, b.eigen.lam)


def test_fit_backends_agree(block_k2):
    if not HAVE_NUMBA:
        pytest.skip("numba not installed")
    _, _, G = block_k2
    a = quiet_fit(G, FitConfig(k=2, seed=0, backend="numpy"))
    b = quiet_fit(G, FitConfig(k=2, seed=0, backend="numba"))
    assert np.abs(a.p_hat - b.p_hat).max() <= 1e-8
    assert np.abs(a.pi_hat - b.pi_hat).max() <= 1e-8


def test_fit_single_community():
    m, pi, G = simulate(1, 300, 0.3, 0.3, seed=2)
    est = quiet_fit(G, FitConfig(k=1))
    assert np.array_equal(est.pi_hat, np.ones((1, 300)))
    density = G.n_edges() / (300 * 299)
    assert abs(est.p_hat[0, 0] - density) <= 1 / 300


def test_fit_mmsb_runs_and_reports():
    m, pi, G = simulate(3, 3000, 0.6, 0.1, alpha0=1.0, seed=4)
    est = quiet_fit(G, FitConfig(k=3, alpha0=1.0))
    met = evaluate(est, pi, m.P)
    assert met.err_P <= 0.15
    d = est.diagnostics
    assert set(d["timings"]) >= {"partition", "moments", "whitening", "tensor", "reconstruction"}
    assert est.tau > 0 and np.isfinite(est.tau)


def test_fit_too_few_nodes():
    _, _, G = simulate(3, 14, 0.5, 0.1)
    with pytest.raises(TooFewNodes):
        fit(G, FitConfig(k=3))


def test_fit_warns_when_assumptions_fail():
    _, _, G = simulate(3, 200, 0.6, 0.1, alpha0=1.0, seed=5)
    with pytest.warns(AssumptionWarning):
        fit(G, FitConfig(k=3, alpha0=1.0))


def test_fit_config_validation():
    with pytest.raises(ValueError):
        FitConfig(k=0)
    with pytest.raises(ValueError):
        FitConfig(k=2, alpha0=-1)
    with pytest.raises(ValueError):
        FitConfig(k=2, fractions=(0.5, 0.5, 0.5, 0.1, 0.1))
    with pytest.raises(ValueError):
        FitConfig(k=2, tau="sometimes")
    with pytest.raises(ValueError):
        FitConfig.from_dict({"k": 2, "bogus": 1})
    cfg = FitConfig(k=4, alpha0=0.5, N=50)
    assert FitConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.iterations() == 50
    assert FitConfig(k=4).iterations() == max(30, math.ceil(10 * math.log(4)))


def test_check_assumptions_homogeneous_zeta():
    m = homogeneous_model(2, 10**4, 0.6, 0.1)
    th = check_assumptions(m)
    assert abs(th.sigma_min_P - 0.5) <= 1e-12
    assert abs(th.zeta - math.sqrt(0.35) / 0.5) <= 1e-12
    assert abs(th.separation_stat - 0.5 / math.sqrt(0.6)) <= 1e-12
    assert th.rho == 2.0


def test_check_assumptions_planted_clique_rho():
    n, s = 10**4, 10**3
    P = np.array([[1.0, 0.5], [0.5, 0.5]])
    m = MmsbModel(alpha=[s / n, 1 - s / n], P=P, n=n, alpha0=0.0, directed=False)
    assert abs(check_assumptions(m).rho - n / s) <= 1e-9


def test_check_assumptions_single_community():
    m = homogeneous_model(1, 500, 0.3, 0.3)
    th = check_assumptions(m)
    assert math.isfinite(th.zeta)
    assert th.all_pass
    assert th.rho >= 1


def test_check_assumptions_on_estimate(block_k2):
    _, _, G = block_k2
    est = quiet_fit(G, FitConfig(k=2))
    th = check_assumptions(est)
    assert "B5" in th.conditions and th.to_dict()["all_pass"] in (True, False)


def test_evaluate_identity_and_scaled():
    pi = np.zeros((2, 10))
    pi[0, :5] = 1
    pi[1, 5:] = 1
    P = np.array([[0.6, 0.1], [0.1, 0.6]])
    met = evaluate(fake_estimate(pi, P), pi, P)
    assert met.err_pi_l1 == 0 and met.err_P == 0 and met.accuracy == 1.0
    bad = pi.copy()
    bad[0, :5] = 0.96
    met = evaluate(fake_estimate(bad, P), pi, P)
    assert abs(met.err_pi_l1 - 0.2) <= 1e-12
    assert abs(met.err_pi_l1_per_node - 0.02) <= 1e-12


def test_evaluate_permutation_invariant():
    rng = np.random.default_rng(6)
    pi = rng.dirichlet([0.5] * 3, 40).T
    P = rng.random((3, 3))
    est = fake_estimate(pi + 0.01 * rng.random(pi.shape), P + 0.01)
    perm = [2, 0, 1]
    est_p = fake_estimate(est.pi_hat[perm], est.p_hat[np.ix_(perm, perm)])
    a, b = evaluate(est, pi, P, xi=0.3), evaluate(est_p, pi, P, xi=0.3)
    for f in ("err_pi_l1", "err_P", "support_recall", "support_specificity", "support_precision"):
        assert getattr(a, f) == getattr(b, f)


def test_evaluate_shape_mismatch():
    pi = np.ones((2, 10)) / 2
    with pytest.raises(DimensionMismatch):
        evaluate(fake_estimate(pi, np.eye(2)), np.ones((3, 10)) / 3, np.eye(3))
