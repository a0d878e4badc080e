import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import precision_product, scalar_l_sn
from uralab.codebook import build_codebook
from uralab.config import SystemConfig
from uralab.dadce import DadCeGraph, exclusive_sum, gaussian_product, l_ce, run_dad_ce


def graph(L=3, K=2, M=2, diag=True, seed=0, **kw):
    r = np.random.default_rng(seed)
    A = r.standard_normal((L, K)) + 1j * r.standard_normal((L, K))
    y = r.standard_normal((L, M)) + 1j * r.standard_normal((L, M))
    return DadCeGraph(A, y, 0.5, diag=diag, **kw)


@given(st.integers(1, 6), st.integers(1, 4))
def test_exclusive_sum_matches_definition(n, m):
    x = np.arange(n * m, dtype=float).reshape(n, m) ** 1.3
    out = exclusive_sum(x, 0)
    for i in range(n):
        np.testing.assert_allclose(out[i], x.sum(0) - x[i])


# ---- interference statistics ------------------------------------------

def test_single_column_sees_only_noise():
    g = graph(K=1)
    mu_z, cov_z = g.interference_stats()
    assert not mu_z.any()
    np.testing.assert_allclose(cov_z, 0.5)


def test_inactive_interferers_contribute_nothing():
    for diag in (True, False):
        g = graph(K=4, diag=diag)
        g.llr_vn[:] = -np.inf
        mu_z, cov_z = g.interference_stats()
        assert not mu_z.any()
        expect = 0.5 if diag else 0.5 * np.eye(2)
        np.testing.assert_allclose(cov_z, np.broadcast_to(expect, cov_z.shape))


def test_known_interferers_hand_evaluation():
    # two certain interferers with exact means: covariance falls to the noise floor
    A = np.array([[1.0 + 1j, 2.0, -1j]])
    y = np.zeros((1, 2), dtype=complex)
    for diag in (True, False):
        g = DadCeGraph(A, y, 0.3, diag=diag)
        g.llr_vn[:] = np.inf
        g.mu_vn[0] = [[1, 2j], [0.5, 0.5], [3, -1]]
        g.cov_vn[:] = 0.0
        mu_z, cov_z = g.interference_stats()
        np.testing.assert_allclose(mu_z[0, 0], 2.0 * np.array([0.5, 0.5]) + (-1j) * np.array([3, -1]))
        d = cov_z[0, 0] if diag else np.diagonal(cov_z[0, 0]).real
        np.testing.assert_allclose(d, 0.3)


def test_diag_mode_keeps_nonnegative_variances():
    g = graph(L=6, K=5, M=3, pa=0.3).iterate(6)
    assert g.cov_vn.ndim == 3 and (g.cov_vn >= 0).all()
    mu_z, cov_z = g.interference_stats()
    assert (cov_z > 0).all()


def test_full_mode_covariances_hermitian_psd():
    g = graph(L=6, K=5, M=3, diag=False, pa=0.3).iterate(6)
    c = g.cov_vn
    np.testing.assert_allclose(c, np.conj(np.swapaxes(c, -1, -2)), atol=1e-10)
    assert (np.linalg.eigvalsh(c) > -1e-10).all()


# ---- observation-node messages -------------------------------------------

def test_identical_hypotheses_give_zero_llr():
    g = graph(K=3)
    g.cov_vn[:] = 0.0
    g.mu_vn[:] = 0.0
    g.sn_update()
    np.testing.assert_allclose(g.llr_sn, 0.0, atol=1e-12)


def test_noiseless_single_device_mean_is_exact():
    h = np.array([0.3 - 1j, 2.0])
    A = np.array([[1.5 + 0.5j], [-0.7j]])
    g = DadCeGraph(A, A @ h[None, :], 1e-9)
    g.sn_update()
    np.testing.assert_allclose(g.mu_sn[:, 0], np.broadcast_to(h, (2, 2)), atol=1e-12)


def test_scalar_llr_against_independent_formula():
    A = np.array([[0.8 - 0.3j, 1.1j]])
    y = np.array([[0.4 + 1.2j]])
    g = DadCeGraph(A, y, 0.7, pa=0.4, llr_warmup=0)
    g.mu_vn[0, :, 0] = [0.2 + 0.1j, -0.5j]
    g.cov_vn[0, :, 0] = [0.6, 0.9]
    g.llr_vn[0] = [0.3, -1.2]
    mu_z, var_z = g.interference_stats()
    g.sn_update()
    p1 = 1 / (1 + np.exp(1.2))
    mz = 1.1j * p1 * (-0.5j)
    vz = abs(1.1j) ** 2 * p1 * (0.9 + (1 - p1) * 0.25) + 0.7
    np.testing.assert_allclose(mu_z[0, 0, 0], mz)
    np.testing.assert_allclose(var_z[0, 0, 0], vz)
    ref = scalar_l_sn(y[0, 0], A[0, 0], mz, vz, 0.2 + 0.1j, 0.6)
    assert g.llr_sn[0, 0] == pytest.approx(ref)


# ---- variable-node messages ---------------------------------------------

def test_warmup_iteration_sends_no_activity_evidence():
    A = np.array([[0.8 - 0.3j, 1.1j]])
    y = np.array([[0.4 + 1.2j]])
    g = DadCeGraph(A, y, 0.7, pa=0.4)
    g.sn_update()
    assert np.all(g.llr_sn == 0.0)
    g.iterations = 1
    g.sn_update()
    assert np.any(g.llr_sn != 0.0)


def test_one_unit_message_halves_mean_and_covariance():
    A = np.ones((2, 1), dtype=complex)
    g = DadCeGraph(A, np.zeros((2, 2)), 1.0)
    m = np.array([2.0 - 1j, 4.0])
    g.mu_sn[:] = 0.0
    g.prec_sn[:] = 0.0
    g.eta_sn[:] = 0.0
    # row 1 sends CN(m, I); row 0 receives it through the exclusion
    g.prec_sn[1, 0] = 1.0
    g.eta_sn[1, 0] = m
    g.vn_update()
    np.testing.assert_allclose(g.cov_vn[0, 0], 0.5)
    np.testing.assert_allclose(g.mu_vn[0, 0], m / 2)


def test_half_prior_and_no_messages_gives_zero_llr():
    g = graph(K=2, pa=0.5)
    g.llr_sn[:] = 0.0
    g.vn_update()
    np.testing.assert_allclose(g.llr_vn, 0.0)


def test_three_messages_precision_summation():
    means = [1.0 + 1j, -0.5, 2j]
    variances = [0.5, 2.0, 1.5]
    A = np.ones((4, 1), dtype=complex)
    g = DadCeGraph(A, np.zeros((4, 1)), 1.0)
    for row, (m, v) in enumerate(zip(means, variances), start=1):
        g.prec_sn[row, 0, 0] = 1 / v
        g.eta_sn[row, 0, 0] = m / v
    g.vn_update()
    mean, var = precision_product(means, variances)
    assert g.mu_vn[0, 0, 0] == pytest.approx(mean)
    assert g.cov_vn[0, 0, 0] == pytest.approx(var)
    mean2, var2 = gaussian_product(np.array([[0], *[[m] for m in means]]),
                                   np.array([[1.0], *[[v] for v in variances]]))
    assert mean2[0] == pytest.approx(mean)


def test_full_gaussian_product_matches_diag():
    r = np.random.default_rng(2)
    means = r.standard_normal((3, 2)) + 0j
    var = r.uniform(0.5, 2, (3, 2))
    m1, c1 = gaussian_product(means, var)
    m2, c2 = gaussian_product(means, var[..., None] * np.eye(2))
    np.testing.assert_allclose(m1, m2)
    np.testing.assert_allclose(c1, np.diagonal(c2).real)


def test_exclusion_principle_by_poisoning():
    for diag in (True, False):
        g = graph(L=5, K=3, M=2, diag=diag, pa=0.3).iterate(2)
        g.sn_update()
        g.mu_sn[2, 1] = np.nan
        g.eta_sn[2, 1] = np.nan
        g.prec_sn[2, 1] = np.nan
        g.llr_sn[2, 1] = np.nan
        g.vn_update()
        assert np.isfinite(g.mu_vn[2, 1]).all() and np.isfinite(g.llr_vn[2, 1])
        assert np.isfinite(g.cov_vn[2, 1]).all()
        others = [l for l in range(5) if l != 2]
        assert np.isnan(g.mu_vn[others, 1]).all()
        assert np.isnan(g.llr_vn[others, 1]).all()
        assert np.isfinite(g.mu_vn[:, [0, 2]]).all()


def test_flooding_is_order_independent():
    g1 = graph(L=6, K=4, M=2, pa=0.3, seed=4)
    g2 = graph(L=6, K=4, M=2, pa=0.3, seed=4)
    perm = np.random.default_rng(0).permutation(4)
    g2.A = g2.A[:, perm]
    g2.abs2 = g2.abs2[:, perm]
    g2.edge = g2.edge[:, perm]
    g1.iterate(5)
    g2.iterate(5)
    np.testing.assert_allclose(g2.mu_vn, g1.mu_vn[:, perm], rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(g2.llr_vn, g1.llr_vn[:, perm], rtol=1e-12, atol=1e-12)


# ---- output stage --------------------------------------------------------

def test_lce_closed_form_case():
    M = 4
    for cov in (np.ones((1, M)), np.eye(M)[None]):
        val = l_ce(np.zeros((1, M)), cov, np.zeros((1, M)), cov)
        assert val[0] == pytest.approx(-M * np.log(2))


def test_lce_positive_for_confident_large_estimate():
    assert l_ce(np.full((1, 3), 2.0 + 0j), np.full((1, 3), 0.01))[0] > 0
    assert l_ce(np.zeros((1, 3)), np.full((1, 3), 0.01))[0] < 0


def test_activity_threshold():
    g = graph(K=3).iterate(1)
    res = g.finalize()
    res.l_dec[:] = [0.1, -0.1, 5.0]
    np.testing.assert_array_equal(res.active_set, [0, 2])
    assert not res.h_hat[1].any()


def test_output_uses_every_edge():
    g = graph(L=4, K=2, M=2, pa=0.3).iterate(3)
    res = g.finalize()
    prec = g.prec_sn.sum(0) + 1.0
    np.testing.assert_allclose(res.sigma_dec, 1.0 / prec)
    np.testing.assert_allclose(res.l_dec, g.l0 + g.llr_sn.sum(0) + res.l_ce)


# ---- whole algorithm -----------------------------------------------------

def test_near_noiseless_single_device():
    cfg = SystemConfig(B=32, Bp=6, Bc=26, Lp=32, L=200, M=4, Ka=1, sigma2=1e-6)
    cb = build_codebook(4, 32, 6)
    r = np.random.default_rng(8)
    for _ in range(5):
        idx = int(r.integers(64))
        h = (r.standard_normal(4) + 1j * r.standard_normal(4)) / np.sqrt(2)
        y = np.sqrt(cfg.power) * np.outer(cb.a[:, idx], h)
        y += np.sqrt(1e-6 / 2) * (r.standard_normal(y.shape) + 1j * r.standard_normal(y.shape))
        res = run_dad_ce(cfg, cb, y)
        np.testing.assert_array_equal(res.active_set, [idx])
        nmse = np.sum(np.abs(res.h_hat[idx] - h) ** 2) / np.sum(np.abs(h) ** 2)
        assert 10 * np.log10(nmse) < -30


def test_pure_noise_detects_almost_nothing():
    cfg = SystemConfig(B=32, Bp=6, Bc=26, Lp=32, L=200, M=4, Ka=2)
    cb = build_codebook(4, 32, 6)
    r = np.random.default_rng(1)
    y = (r.standard_normal((32, 4)) + 1j * r.standard_normal((32, 4))) / np.sqrt(2)
    assert len(run_dad_ce(cfg, cb, y).active_set) <= 1


def test_nmse_improves_with_longer_preamble():
    r = np.random.default_rng(3)
    out = {}
    for Lp in (24, 48):
        cfg = SystemConfig(B=32, Bp=6, Bc=26, Lp=Lp, L=200, M=4, Ka=3, ebn0_db=8)
        cb = build_codebook(5, Lp, 6)
        errs = []
        for _ in range(40):
            idx = r.choice(64, 3, replace=False)
            h = (r.standard_normal((3, 4)) + 1j * r.standard_normal((3, 4))) / np.sqrt(2)
            y = np.sqrt(cfg.power) * cb.a[:, idx] @ h
            y += (r.standard_normal(y.shape) + 1j * r.standard_normal(y.shape)) / np.sqrt(2)
            res = run_dad_ce(cfg, cb, y)
            errs.append(np.sum(np.abs(res.h_hat[idx] - h) ** 2) / np.sum(np.abs(h) ** 2))
        out[Lp] = np.mean(errs)
    assert out[48] < out[24]


def test_shape_check():
    cfg = SystemConfig(B=32, Bp=6, Bc=26, Lp=32, L=200, M=4)
    with pytest.raises(ValueError):
        run_dad_ce(cfg, build_codebook(4, 32, 6), np.zeros((31, 4)))
