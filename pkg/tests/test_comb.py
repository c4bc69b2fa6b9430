import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from stratafront import comb_mu, comb_mu_large_L, comb_mu_zero_lambda
from stratafront.comb import comb_residual

# Independently solved reference for the drift-free unit comb: bisection on
# 2 s = (e^s + 1)/(e^s - 1), frozen from a scipy.brentq run in this file.
MU_UNIT_COMB = -1.089157097202029


def _oracle_mu_zero(alpha: float, L: float) -> float:
    # independent scalar root of 2 s = alpha L (e^{sL} + 1)/(e^{sL} - 1)
    f = lambda s: alpha * L * (math.exp(s * L) + 1.0) / (math.exp(s * L) - 1.0) - 2.0 * s
    s = brentq(f, 1e-9, 40.0 + alpha * L, xtol=1e-15, rtol=8.9e-16)
    return -s * s


def test_unit_comb_against_independent_oracle():
    assert _oracle_mu_zero(1.0, 1.0) == pytest.approx(MU_UNIT_COMB, abs=1e-12)
    cd = comb_mu(1.0, 1.0, 1.0, 0.0)
    assert cd.mu == pytest.approx(MU_UNIT_COMB, abs=1e-11)
    cd0 = comb_mu_zero_lambda(1.0, 1.0, 1.0)
    assert cd0.mu == pytest.approx(MU_UNIT_COMB, abs=1e-11)


def test_zero_drift_forms_agree():
    for alpha, L in [(0.5, 0.3), (1.0, 1.0), (2.0, 2.0), (4.0, 0.7)]:
        a = comb_mu(alpha, L, 1.0, 0.0).mu
        b = comb_mu_zero_lambda(alpha, L, 1.0).mu
        assert abs(a - b) <= 1e-12 * (1.0 + abs(a))


def test_residual_and_bounds_on_sweep():
    alphas = [0.25, 0.5, 1.0, 2.0, 4.0]
    Ls = [0.05, 0.2, 0.5, 1.0, 2.0]
    for alpha in alphas:
        for L in Ls:
            cd = comb_mu_zero_lambda(alpha, L, 1.0)
            assert abs(cd.residual) <= 1e-12 * (1.0 + alpha * L)
            assert cd.mu < -0.25 * alpha * alpha * L * L
            assert cd.mu <= -alpha
            assert cd.mu >= -alpha - alpha * alpha * L * L - 1e-9


def test_slope_rescaling():
    # slope folds into the effective mass: comb(alpha, slope=2) == comb(2 alpha)
    a = comb_mu(1.0, 1.0, 2.0, 0.5).mu
    b = comb_mu(2.0, 1.0, 1.0, 0.5).mu
    assert a == pytest.approx(b, abs=1e-13)


def test_evenness_is_exact():
    for lb in (0.3, 1.7, 25.0):
        assert comb_mu(1.0, 1.0, 1.0, lb).mu == comb_mu(1.0, 1.0, 1.0, -lb).mu


def test_monotone_in_drift_magnitude():
    mus = [comb_mu(1.0, 1.0, 1.0, lb).mu for lb in (0.0, 0.25, 0.5, 1.0, 2.0, 4.0)]
    assert all(b >= a for a, b in zip(mus, mus[1:]))


def test_large_L_reference_values():
    assert comb_mu_large_L(1.0, 50.0, 1.0, 0.0) == -625.0
    assert comb_mu_large_L(1.0, 50.0, 1.0, 1.0) == -624.0
    cd = comb_mu(1.0, 50.0, 1.0, 1.0)
    ref = comb_mu_large_L(1.0, 50.0, 1.0, 1.0)
    assert abs(cd.mu - ref) / abs(cd.mu) <= 0.02


def test_small_L_approaches_homogeneous():
    cd = comb_mu_zero_lambda(1.0, 0.01, 1.0)
    assert cd.mu == pytest.approx(-1.0, abs=1e-2)


def test_auxiliary_root_dominates_drift():
    for lb in (0.0, 0.5, 3.0, 20.0):
        cd = comb_mu(1.0, 1.0, 1.0, lb)
        assert cd.s > abs(lb)


def test_overflow_safe_far_regime():
    # s*L ~ 1600: naive exponentials overflow, the solved root must not
    cd = comb_mu(8.0, 20.0, 1.0, 1.0)
    assert math.isfinite(cd.mu)
    assert abs(cd.residual) <= 1e-12 * (1.0 + 8.0 * 20.0)
    assert cd.mu < -0.25 * (8.0 * 20.0) ** 2 + 1.0 + 1e-9


@settings(max_examples=60, deadline=None)
@given(
    alpha=st.floats(0.1, 5.0),
    L=st.floats(0.05, 4.0),
    lb=st.floats(-6.0, 6.0),
)
def test_comb_invariants_property(alpha, L, lb):
    cd = comb_mu(alpha, L, 1.0, lb)
    assert cd.s > abs(lb)
    assert cd.mu <= -alpha + 1e-10
    assert abs(cd.residual) <= 1e-12 * (1.0 + alpha * L)
    assert abs(comb_residual(cd.mu, lb, alpha, L, 1.0)) <= 1e-12 * (1.0 + alpha * L)


def test_parameter_domain():
    from stratafront import ParameterDomainError

    with pytest.raises(ParameterDomainError):
        comb_mu(-1.0, 1.0, 1.0, 0.0)
    with pytest.raises(ParameterDomainError):
        comb_mu_large_L(1.0, -1.0, 1.0, 0.0)
    with pytest.raises(ParameterDomainError):
        comb_mu(math.nan, 1.0, 1.0, 0.0)
    with pytest.raises(ParameterDomainError):
        comb_mu_zero_lambda(1.0, math.inf, 1.0)


def test_comb_curve_csv(tmp_path):
    from stratafront.comb import comb_curve_to_csv

    pts = [comb_mu(1.0, 1.0, 1.0, lb) for lb in (0.0, 0.5, 1.0)]
    path = tmp_path / "comb.csv"
    comb_curve_to_csv(pts, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "lambda_bar,mu,s,residual"
    assert len(lines) == 4
