"""Markup-level closed forms: elasticities, markdown, bargaining weight."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tradebargain import (
    BilateralShares,
    CalibratedParams,
    ParameterDomainError,
    StructuralParams,
    UnboundedMarkupError,
    bargaining_weight,
    bilateral_markup,
    derive_eta,
    lambda_components,
    oligopoly_markup,
    oligopsony_markdown,
    residual_demand_elasticity,
)

CP = CalibratedParams(nu=4.0, gamma=0.5, rho=10.0, varrho=1.0)


def test_derive_eta_baseline_calibration_is_exact():
    assert derive_eta(4.0, 0.5, 1.0) == 2.5


def test_derive_eta_low_nu():
    assert derive_eta(2.5, 0.5, 1.0) == pytest.approx(1.75, abs=1e-12)


def test_derive_eta_decreasing_returns():
    # eta = 1 + gamma*(nu-1)/(varrho + nu*(1-varrho))
    assert derive_eta(4.0, 0.5, 0.8) == pytest.approx(1.0 + 1.5 / 1.6, abs=1e-12)


def test_derive_eta_rejects_nonpositive_denominator():
    with pytest.raises(ParameterDomainError):
        derive_eta(4.0, 0.5, 2.0)


def test_calibrated_params_derives_eta_when_omitted():
    assert CP.eta == 2.5
    assert CalibratedParams(nu=4.0, gamma=0.5, rho=10.0, varrho=1.0, eta=2.5).eta == 2.5


def test_calibrated_params_requires_rho_above_eta():
    with pytest.raises(ParameterDomainError):
        CalibratedParams(nu=4.0, gamma=0.5, rho=2.0, varrho=1.0)


def test_calibrated_params_requires_gamma_within_varrho():
    with pytest.raises(ParameterDomainError):
        CalibratedParams(nu=4.0, gamma=0.9, rho=10.0, varrho=0.8)


def test_structural_params_domain():
    with pytest.raises(ParameterDomainError):
        StructuralParams(phi=0.0, theta=0.5)
    with pytest.raises(ParameterDomainError):
        StructuralParams(phi=0.5, theta=0.0)
    with pytest.raises(ParameterDomainError):
        StructuralParams(phi=0.5, theta=1.2)
    StructuralParams(phi=0.5, theta=1.0)


def test_bilateral_shares_domain():
    with pytest.raises(ParameterDomainError):
        BilateralShares(s=-0.1, x=0.5)
    with pytest.raises(ParameterDomainError):
        BilateralShares(s=0.5, x=1.5)


def test_residual_demand_elasticity_values():
    assert residual_demand_elasticity(0.5, CP) == pytest.approx(6.25, abs=1e-14)
    assert residual_demand_elasticity(0.0, CP) == CP.rho
    assert residual_demand_elasticity(1.0, CP) == CP.eta


def test_oligopoly_markup_value():
    assert oligopoly_markup(0.5, CP) == pytest.approx(6.25 / 5.25, abs=1e-14)


def test_oligopoly_markup_rejects_inelastic_demand():
    # Out-of-range share pushes epsilon below 1; the guard must fire.
    low = CalibratedParams(nu=1.2, gamma=0.5, rho=1.2, varrho=1.0, eta=1.1)
    with pytest.raises(UnboundedMarkupError):
        oligopoly_markup(2.5, low)


def test_markdown_reference_value():
    assert oligopsony_markdown(0.10, 0.454) == pytest.approx(0.9402824226, abs=1e-9)


def test_markdown_endpoints():
    theta = 0.454
    assert oligopsony_markdown(0.0, theta) == 1.0
    assert oligopsony_markdown(1.0, theta) == pytest.approx(theta, abs=1e-15)
    x = np.linspace(0.0, 1.0, 7)
    assert np.all(oligopsony_markdown(x, 1.0) == 1.0)


@settings(max_examples=200)
@given(
    x=st.floats(0.0, 1.0, allow_nan=False),
    theta=st.floats(0.05, 1.0, allow_nan=False),
)
def test_markdown_bounds(x, theta):
    m = oligopsony_markdown(x, theta)
    assert theta - 1e-12 <= m <= 1.0 + 1e-12


@settings(max_examples=100)
@given(theta=st.floats(0.05, 0.999))
def test_markdown_monotone_in_x(theta):
    x = np.linspace(0.0, 1.0, 101)
    m = oligopsony_markdown(x, theta)
    assert np.all(np.diff(m) < 0.0)


def test_lambda_components_interior_value():
    lam_c, lam_n, lam = lambda_components(0.5, CP)
    # (eta-1)*s/(eps-1) = 1.5*0.5/5.25
    assert lam_c == pytest.approx(1.5 * 0.5 / 5.25, abs=1e-14)
    assert lam_n == pytest.approx(
        1.0 / -np.expm1(CP.share_curvature * np.log(0.5)), rel=1e-13
    )
    assert lam == pytest.approx(lam_c * lam_n, rel=1e-13)


def test_lambda_matches_profit_based_oracle():
    # Independent route: numeric downstream profit from the demand chain.
    def profit(pa, pb, ta, tb, cp, p_dom=1.0, prod=1.0, demand=1.0):
        delta = cp.varrho - cp.gamma
        pf = (ta**cp.rho * pa ** (1 - cp.rho) + tb**cp.rho * pb ** (1 - cp.rho)) ** (
            1 / (1 - cp.rho)
        )
        k = (pf / cp.gamma) ** cp.gamma * (
            (p_dom / delta) ** delta if delta > 0 else 1.0
        )
        m0 = (k / prod) ** (1 / cp.varrho)
        bend = cp.varrho / (cp.varrho + cp.nu * (1 - cp.varrho))
        q = ((cp.nu / (cp.nu - 1.0)) ** (-cp.nu) * m0 ** (-cp.nu) * demand) ** bend
        mc = m0 * q ** ((1 - cp.varrho) / cp.varrho)
        return (cp.nu / (cp.nu - 1.0) - cp.varrho) * mc * q

    for varrho in (1.0, 0.8):
        cp = CalibratedParams(nu=4.0, gamma=0.5, rho=10.0, varrho=varrho)
        pa, pb, ta, tb = 1.3, 0.9, 1.1, 1.0
        wa = ta**cp.rho * pa ** (1 - cp.rho)
        s = wa / (wa + tb**cp.rho * pb ** (1 - cp.rho))
        h = 1e-6
        dlnpi = (
            np.log(profit(pa * np.exp(h), pb, ta, tb, cp))
            - np.log(profit(pa * np.exp(-h), pb, ta, tb, cp))
        ) / (2 * h)
        eps = residual_demand_elasticity(s, cp)
        pi = profit(pa, pb, ta, tb, cp)
        pi_lost = profit(1e9, pb, ta, tb, cp)
        lam_c, lam_n, _ = lambda_components(s, cp)
        assert lam_c == pytest.approx(-dlnpi / (eps - 1.0), rel=1e-7)
        assert lam_n == pytest.approx(pi / (pi - pi_lost), rel=1e-10)


def test_lambda_tends_to_one_at_both_ends():
    _, _, lam0 = lambda_components(0.0, CP)
    _, _, lam1 = lambda_components(1.0, CP)
    assert lam0 == 1.0
    assert lam1 == pytest.approx(1.0, abs=1e-12)
    _, _, lam_eps = lambda_components(1e-9, CP)
    assert lam_eps == pytest.approx(1.0, abs=1e-6)


def test_lambda_is_hump_shaped():
    s = np.linspace(0.0, 1.0, 401)
    _, _, lam = lambda_components(s, CP)
    peak = int(np.argmax(lam))
    assert 0 < peak < 400
    assert lam[peak] > 1.0
    assert np.all(np.diff(lam[: peak + 1]) > 0.0)
    assert np.all(np.diff(lam[peak:]) < 0.0)


def test_bargaining_weight_reference_value():
    assert bargaining_weight(1.2, 0.827) == pytest.approx(0.8515531148, abs=1e-9)


@settings(max_examples=200)
@given(
    lam=st.floats(1e-6, 1e3),
    phi=st.floats(1e-4, 1.0 - 1e-4),
)
def test_bargaining_weight_bounds(lam, phi):
    w = bargaining_weight(lam, phi)
    assert 0.0 < w < 1.0


def test_bargaining_weight_monotone():
    lam = np.linspace(0.1, 5.0, 50)
    w = bargaining_weight(lam, 0.5)
    assert np.all(np.diff(w) > 0)
    phi = np.linspace(0.01, 0.99, 50)
    w2 = bargaining_weight(1.3, phi)
    assert np.all(np.diff(w2) > 0)


def test_bilateral_markup_corner_full_dependence():
    sp = StructuralParams(phi=0.827, theta=0.454)
    dec = bilateral_markup(BilateralShares(s=1.0, x=1.0), sp, CP)
    expected = (1 - sp.phi) * CP.eta / (CP.eta - 1.0) + sp.phi * sp.theta
    assert dec.mu == pytest.approx(expected, abs=1e-14)
    assert dec.lam == pytest.approx(1.0, abs=1e-12)


def test_bilateral_markup_atomistic_corner():
    # s = x = 0: pure oligopoly pricing against the fringe.
    sp = StructuralParams(phi=0.827, theta=0.454)
    dec = bilateral_markup(BilateralShares(s=0.0, x=0.0), sp, CP)
    assert dec.mu_oligopsony == 1.0
    assert dec.omega == pytest.approx(sp.phi, abs=1e-14)
    mu_o = CP.rho / (CP.rho - 1.0)
    assert dec.mu == pytest.approx((1 - sp.phi) * mu_o + sp.phi, abs=1e-14)


@settings(max_examples=200)
@given(
    s=st.floats(0.0, 1.0),
    x=st.floats(0.0, 1.0),
    phi=st.floats(0.01, 0.99),
    theta=st.floats(0.05, 1.0),
)
def test_markup_is_convex_combination(s, x, phi, theta):
    sp = StructuralParams(phi=phi, theta=theta)
    dec = bilateral_markup(BilateralShares(s=s, x=x), sp, CP)
    lo = min(dec.mu_oligopoly, dec.mu_oligopsony) - 1e-12
    hi = max(dec.mu_oligopoly, dec.mu_oligopsony) + 1e-12
    assert lo <= dec.mu <= hi
    assert 0.0 <= dec.omega <= 1.0


def test_bilateral_markup_accepts_phi_arrays():
    phis = np.array([0.1, 0.5, 0.9])
    sp_objs = [StructuralParams(phi=float(p), theta=0.454) for p in phis]

    class _HetPhi:
        phi = phis
        theta = 0.454

    dec = bilateral_markup(BilateralShares(s=0.3, x=0.2), _HetPhi, CP)
    mu = np.asarray(dec.mu)
    assert mu.shape == (3,)
    for k, spk in enumerate(sp_objs):
        ref = bilateral_markup(BilateralShares(s=0.3, x=0.2), spk, CP)
        assert mu[k] == pytest.approx(ref.mu, abs=1e-14)
