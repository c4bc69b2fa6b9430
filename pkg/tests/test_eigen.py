import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stratafront import (
    DispersionMethod,
    ParameterDomainError,
    UnsupportedRepresentationError,
    adjoint_psi,
    comb_mu,
    constant_medium,
    dispersion_curve,
    eigen,
    make_dirac_comb,
    mollify,
    mu_grid,
    nadin_value,
    piecewise_constant_medium,
    random_medium,
    reconstruct_psi_from_eta,
    transfer_matrix_mu,
)
from stratafront.eigen import _assemble_cell_operator, _btilde_cached

TWO_PATCH = piecewise_constant_medium([(0.5, 2.0), (0.5, 0.0)])


def _random_eta(rng, N, modes=3, scale=0.3):
    x = (np.arange(N) + 0.5) / N
    t = np.zeros(N)
    for k in range(1, modes + 1):
        a, b = rng.normal(0.0, scale, 2)
        t += a * np.cos(2 * np.pi * k * x) + b * np.sin(2 * np.pi * k * x)
    return np.exp(t)


# ---------------------------------------------------------------------------
# grid eigensolver


def test_constant_medium_exact_pair():
    m = constant_medium(1.0, 1.0)
    s = mu_grid(m, 0.7, 0.0, 128)
    assert s.mu == pytest.approx(-1.0, abs=1e-10)
    assert np.all(np.abs(s.psi - 1.0) < 1e-9)
    assert s.method is DispersionMethod.GRID


def test_constant_medium_with_slope():
    m = constant_medium(1.0, 1.0, slope=2.0)
    s = mu_grid(m, 0.3, 0.0, 64)
    assert s.mu == pytest.approx(-2.0, abs=1e-9)


def test_identity_direction_enters_through_product():
    m = random_medium(1.0, 1.0, 1.0, seed=12)
    rng = np.random.default_rng(5)
    for _ in range(8):
        lam = float(rng.uniform(0.0, 3.0))
        theta = float(rng.uniform(0.0, 2.0 * math.pi))
        a = mu_grid(m, lam, theta, 128).mu
        b = mu_grid(m, lam * math.cos(theta), 0.0, 128).mu
        assert a == b  # bitwise: both paths see the same drift value


def test_perpendicular_direction_is_driftless():
    m = random_medium(1.0, 1.0, 1.0, seed=2)
    a = mu_grid(m, 3.2, math.pi / 2.0, 128).mu
    b = mu_grid(m, 0.0, 0.0, 128).mu
    assert a == pytest.approx(b, abs=1e-12)


def test_grid_matches_transfer_matrix_oracle():
    got = mu_grid(TWO_PATCH, 0.4, 0.0, 1024).mu
    want = transfer_matrix_mu(TWO_PATCH, 0.4)
    assert abs(got - want) <= 1e-4


def test_transfer_matrix_constant_segment():
    m = piecewise_constant_medium([(1.0, 0.8)])
    for lb in (0.0, 0.5, 2.0):
        assert transfer_matrix_mu(m, lb) == pytest.approx(-0.8, abs=1e-10)


def test_transfer_matrix_matches_comb_dispersion():
    h = make_dirac_comb(1.0, 1.0, 1.0)
    for lb in (0.0, 0.3, 1.0, 2.5):
        assert transfer_matrix_mu(h, lb) == pytest.approx(
            comb_mu(1.0, 1.0, 1.0, lb).mu, abs=1e-10
        )


def test_eigenvalue_bounds_on_ensemble(random_ensemble):
    for m in random_ensemble[:8]:
        at = m.alpha_eff
        for lb in (0.0, 0.5, 2.0):
            s = mu_grid(m, lb, 0.0, 256)
            assert -at - at * at * m.period_L**2 - 1e-9 <= s.mu <= -at + 1e-9


def test_comb_eigenvalue_is_minimal(random_ensemble):
    for m in random_ensemble[:8]:
        for lb in (0.0, 0.5, 2.0):
            grid = mu_grid(m, lb, 0.0, 256).mu
            comb = comb_mu(1.0, 1.0, 1.0, lb).mu
            assert comb < grid


def test_eigenfunction_positivity_and_ratio(random_ensemble):
    sup = 0.0
    for m in random_ensemble[:6]:
        s = mu_grid(m, 0.8, 0.0, 256)
        assert s.psi.min() > 0.0
        assert s.psi.max() == pytest.approx(1.0)
        sup = max(sup, float(s.psi.max() / s.psi.min()))
    assert math.isfinite(sup)
    print(f"\nobserved eigenfunction max/min supremum over ensemble: {sup:.6g}")


def test_mollification_continuity_monotone_tail():
    h = make_dirac_comb(1.0, 1.0, 1.0)
    target = comb_mu(1.0, 1.0, 1.0, 0.5).mu
    gaps = []
    for eps in (0.2, 0.1, 0.05, 0.025):
        mu_eps = mu_grid(mollify(h, eps), 0.5, 0.0, 2048).mu
        gaps.append(abs(mu_eps - target))
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] / abs(target) <= 1e-2


def test_grid_convergence_is_second_order():
    m = mollify(make_dirac_comb(1.0, 1.0, 1.0), 0.4)
    mus = {n: mu_grid(m, 0.5, 0.0, n).mu for n in (256, 512, 1024)}
    d1 = abs(mus[256] - mus[512])
    d2 = abs(mus[512] - mus[1024])
    assert math.log2(d1 / d2) >= 1.8


def test_grid_rejects_comb_and_coarse_drift():
    h = make_dirac_comb(1.0, 1.0, 1.0)
    with pytest.raises(UnsupportedRepresentationError):
        mu_grid(h, 0.5, 0.0, 256)
    m = constant_medium(1.0, 1.0)
    with pytest.raises(ParameterDomainError):
        mu_grid(m, 40.0, 0.0, 32)  # drift Peclet limit
    with pytest.raises(ParameterDomainError):
        mu_grid(m, 0.5, 0.0, 16)


def test_residual_is_small():
    m = random_medium(1.0, 1.0, 1.0, seed=1)
    s = mu_grid(m, 0.5, 0.0, 256)
    scale = 4.0 * 256**2 + float(_btilde_cached(m, 256).max())
    assert s.residual <= 1e-10 * scale


# ---------------------------------------------------------------------------
# adjoint and variational certificate


def test_adjoint_constant():
    m = constant_medium(1.0, 1.0)
    s = adjoint_psi(m, 0.9, 0.0, 128)
    assert s.mu == pytest.approx(-1.0, abs=1e-10)
    assert np.all(np.abs(s.psi - 1.0) < 1e-9)


def test_adjoint_spectrum_equality(random_ensemble):
    for m in random_ensemble[:5]:
        a = mu_grid(m, 0.5, 0.0, 256).mu
        b = adjoint_psi(m, 0.5, 0.0, 256).mu
        assert abs(a - b) <= 1e-8


def test_certificate_constant_eta_hits_mean():
    m = random_medium(1.0, 1.0, 1.0, seed=8)
    cert = nadin_value(m, 0.7, 0.0, np.ones(256))
    assert cert.value_H == pytest.approx(-1.0, abs=1e-12)
    assert cert.schwarz_gap == 0.0


def test_certificate_upper_bounds_eigenvalue(rng):
    m = random_medium(1.0, 1.0, 1.0, seed=4)
    N = 512
    mu = mu_grid(m, 0.5, 0.0, N).mu
    for _ in range(100):
        eta = _random_eta(rng, N)
        cert = nadin_value(m, 0.5, 0.0, eta)
        assert cert.value_H >= mu - 1e-8
        assert cert.schwarz_gap >= 0.0


def test_certificate_minimizer_reconstruction():
    m = random_medium(1.0, 1.0, 1.0, seed=4)
    N = 512
    s = mu_grid(m, 0.5, 0.0, N)
    sa = adjoint_psi(m, 0.5, 0.0, N)
    eta = np.sqrt(s.psi * sa.psi)
    cert = nadin_value(m, 0.5, 0.0, eta)
    assert abs(cert.value_H - s.mu) <= 1e-4 * abs(s.mu)
    # perturbing the minimizer cannot lower the functional
    bumped = eta * (1.0 + 0.05 * np.cos(2 * np.pi * (np.arange(N) + 0.5) / N))
    assert nadin_value(m, 0.5, 0.0, bumped).value_H >= cert.value_H - 1e-10


def test_certificate_atom_path():
    h = make_dirac_comb(1.0, 1.0, 1.0)
    N = 512
    mu_h = comb_mu(1.0, 1.0, 1.0, 0.5).mu
    rng = np.random.default_rng(3)
    for _ in range(50):
        eta = _random_eta(rng, N)
        cert = nadin_value(h, 0.5, 0.0, eta)
        assert cert.value_H >= mu_h - 1e-8


def test_certificate_degenerate_branch():
    m = random_medium(1.0, 1.0, 1.0, seed=6)
    N = 256
    eta = np.abs(np.sin(2 * np.pi * (np.arange(N) + 0.5) / N))
    eta[0] = 0.0
    lam = 0.8
    cert = nadin_value(m, lam, 0.0, eta)
    assert cert.degenerate
    base = nadin_value(m, 0.0, 0.0, eta)
    # with a vanishing test function the drift contributes its full square
    assert cert.value_H == pytest.approx(base.value_H + lam * lam, abs=1e-12)
    with pytest.raises(ParameterDomainError):
        nadin_value(m, 0.5, 0.0, eta - 0.1)


def test_reconstruct_psi_trivial_and_minimizer():
    m = random_medium(1.0, 1.0, 1.0, seed=4)
    N = 512
    ones = np.ones(N)
    np.testing.assert_allclose(reconstruct_psi_from_eta(ones, m, 0.7, 0.0), ones)

    s = mu_grid(m, 0.5, 0.0, N)
    sa = adjoint_psi(m, 0.5, 0.0, N)
    eta = np.sqrt(s.psi * sa.psi)
    psi = reconstruct_psi_from_eta(eta, m, 0.5, 0.0)
    A = _assemble_cell_operator(_btilde_cached(m, N), m.period_L, 0.5)
    resid = float(np.max(np.abs(A @ psi - s.mu * psi)))
    assert resid <= 1e-3
    assert np.max(np.abs(psi - s.psi)) <= 1e-6
    with pytest.raises(ParameterDomainError):
        reconstruct_psi_from_eta(ones - 1.0, m, 0.5, 0.0)


def test_reconstruct_constant_medium_identity():
    m = constant_medium(1.0, 1.0)
    N = 128
    s = mu_grid(m, 0.5, 0.0, N)
    sa = adjoint_psi(m, 0.5, 0.0, N)
    eta = np.sqrt(s.psi * sa.psi)
    psi = reconstruct_psi_from_eta(eta, m, 0.5, 0.0)
    assert np.max(np.abs(psi - 1.0)) <= 1e-8


# ---------------------------------------------------------------------------
# dispersion curves and cache


def test_dispersion_curve_constant():
    m = constant_medium(1.0, 1.0)
    curve = dispersion_curve(m, 0.0, [0.0, 0.5, 1.0], N=64)
    assert all(s.mu == pytest.approx(-1.0, abs=1e-10) for s in curve)


def test_dispersion_curve_even_in_lambda():
    m = random_medium(1.0, 1.0, 1.0, seed=9)
    plus = dispersion_curve(m, 0.0, [0.5, 1.0], N=128)
    minus = dispersion_curve(m, 0.0, [-0.5, -1.0], N=128)
    for p, q in zip(plus, minus):
        assert abs(p.mu - q.mu) <= 1e-8


def test_dispersion_curve_comb_analytic_vs_transfer():
    h = make_dirac_comb(1.0, 1.0, 1.0)
    curve = dispersion_curve(h, 0.0, [0.0, 0.5, 1.0, 1.5], N=128)
    for s in curve:
        assert s.method is DispersionMethod.COMB_ANALYTIC
        assert s.psi.min() > 0.0
        assert abs(s.mu - transfer_matrix_mu(h, s.lambda_bar)) <= 1e-8


def test_dispersion_cache_hit_and_clear():
    m = random_medium(1.0, 1.0, 1.0, seed=13)
    eigen.clear_dispersion_cache()
    a = mu_grid(m, 0.5, 0.0, 128)
    b = mu_grid(m, 0.5, 0.0, 128)
    assert a.mu == b.mu and a.psi is b.psi  # served from cache
    eigen.clear_dispersion_cache()
    c = mu_grid(m, 0.5, 0.0, 128)
    assert c.mu == a.mu


def test_dispersion_csv(tmp_path):
    h = make_dirac_comb(1.0, 1.0, 1.0)
    curve = dispersion_curve(h, 0.0, np.arange(0.0, 2.0001, 0.1), N=64)
    path = tmp_path / "disp.csv"
    eigen.dispersion_to_csv(curve, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "lambda,theta,lambda_cos_theta,mu,method,grid_N,residual"
    assert len(lines) == 22  # header + 21 rows


@settings(max_examples=25, deadline=None)
@given(lam=st.floats(0.0, 4.0), theta=st.floats(0.0, 6.283185307179586))
def test_identity_property(lam, theta):
    m = TWO_PATCH
    assert (
        mu_grid(m, lam, theta, 64).mu == mu_grid(m, lam * math.cos(theta), 0.0, 64).mu
    )
