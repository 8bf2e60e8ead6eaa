"""Pass-through elasticities against finite-difference oracles and grid laws."""

import numpy as np
import pytest

from tradebargain import (
    BilateralShares,
    CalibratedParams,
    StructuralParams,
    bargaining_weight,
    bilateral_markup,
    cost_elasticity,
    gamma_oligopoly,
    gamma_oligopsony,
    gamma_omega,
    heatmap_grid,
    lambda_components,
    markup_elasticity,
    markup_share_slopes,
    oligopoly_markup,
    oligopsony_markdown,
    passthrough,
)

CP = CalibratedParams(nu=4.0, gamma=0.5, rho=10.0, varrho=1.0)
SP = StructuralParams(phi=0.827, theta=0.454)

FD_SEED = 20260818
FD_STEP = 1e-6


def _share_paths(s, x, h, cp):
    # Own-price share responses, exact CES forms with the correct first
    # derivatives d ln s/d ln p = -(rho-1)(1-s), d ln x/d ln p = -eps(1-x).
    w = s * np.exp((1.0 - cp.rho) * h)
    s_new = w / (w + (1.0 - s))
    eps = (1.0 - s) * cp.rho + s * cp.eta
    q = x * np.exp(-eps * h)
    x_new = q / (q + (1.0 - x))
    return s_new, x_new


def _interior_draws(n=1000):
    rng = np.random.default_rng(FD_SEED)
    return rng.uniform(0.01, 0.99, n), rng.uniform(0.01, 0.99, n)


def _rel_err(a, b):
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-12)


def test_gamma_oligopoly_reference_value():
    assert gamma_oligopoly(0.5, CP) == pytest.approx(18.0 / 35.0, abs=1e-14)


def test_gamma_oligopoly_nonnegative_and_vanishes_at_ends():
    s = np.linspace(0.0, 1.0, 201)
    g = gamma_oligopoly(s, CP)
    assert np.all(g >= 0.0)
    assert g[0] == 0.0 and g[-1] == 0.0


def test_gamma_oligopsony_sign_and_ends():
    x = np.linspace(0.0, 1.0, 201)
    g = gamma_oligopsony(BilateralShares(s=0.4, x=x), SP, CP)
    assert np.all(g <= 1e-15)
    assert g[0] == 0.0 and g[-1] == 0.0
    g1 = gamma_oligopsony(BilateralShares(s=0.4, x=x), StructuralParams(phi=0.5, theta=1.0), CP)
    assert np.all(g1 == 0.0)


def test_gamma_omega_crosses_zero_at_lambda_peak():
    s = np.linspace(1e-4, 1.0 - 1e-4, 4001)
    _, _, lam = lambda_components(s, CP)
    g = np.asarray(gamma_omega(BilateralShares(s=s, x=0.3), SP, CP))
    peak = int(np.argmax(lam))
    assert g[peak - 5] > 0.0 > g[peak + 5]


def test_gamma_components_match_finite_differences():
    s, x = _interior_draws()
    h = FD_STEP

    sm, xm = _share_paths(s, x, -h, CP)
    sp_, xp = _share_paths(s, x, h, CP)

    g_fd = -(np.log(oligopoly_markup(sp_, CP)) - np.log(oligopoly_markup(sm, CP))) / (2 * h)
    assert _rel_err(g_fd, np.asarray(gamma_oligopoly(s, CP))).max() < 1e-6

    m_fd = -(
        np.log(oligopsony_markdown(xp, SP.theta)) - np.log(oligopsony_markdown(xm, SP.theta))
    ) / (2 * h)
    g_d = np.asarray(gamma_oligopsony(BilateralShares(s=s, x=x), SP, CP))
    assert _rel_err(m_fd, g_d).max() < 1e-6

    def ln_omega(sv):
        _, _, lam = lambda_components(sv, CP)
        return np.log(np.asarray(bargaining_weight(lam, SP.phi)))

    w_fd = -(ln_omega(sp_) - ln_omega(sm)) / (2 * h)
    g_w = np.asarray(gamma_omega(BilateralShares(s=s, x=x), SP, CP))
    assert _rel_err(w_fd, g_w).max() < 1e-6


def test_cost_elasticity_matches_cost_aggregation_oracle():
    s, x = _interior_draws()
    h = FD_STEP
    eps = (1.0 - s) * CP.rho + s * CP.eta

    def ln_cost(hh):
        qi = (1.0 - x) + x * np.exp(-eps * hh)
        return (1.0 - SP.theta) / SP.theta * np.log(qi)

    lam_fd = -(ln_cost(h) - ln_cost(-h)) / (2 * h)
    lam_cf = np.asarray(cost_elasticity(BilateralShares(s=s, x=x), SP, CP))
    assert _rel_err(lam_fd, lam_cf).max() < 1e-6


def test_composed_markup_elasticity_matches_finite_differences():
    s, x = _interior_draws()
    h = FD_STEP

    def ln_mu(sv, xv):
        return np.log(np.asarray(bilateral_markup(BilateralShares(s=sv, x=xv), SP, CP).mu))

    sm, xm = _share_paths(s, x, -h, CP)
    sp_, xp = _share_paths(s, x, h, CP)
    g_fd = -(ln_mu(sp_, xp) - ln_mu(sm, xm)) / (2 * h)
    g_cf = np.asarray(markup_elasticity(BilateralShares(s=s, x=x), SP, CP))
    assert _rel_err(g_fd, g_cf).max() < 1e-6


def test_markup_elasticity_agrees_with_partial_slope_route():
    # Independent composition: Gamma = (rho-1)(1-s)*dlnmu/dlns + eps(1-x)*dlnmu/dlnx.
    s, x = _interior_draws(400)
    shares = BilateralShares(s=s, x=x)
    d_s, d_x = markup_share_slopes(shares, SP, CP)
    eps = (1.0 - s) * CP.rho + s * CP.eta
    direct = (CP.rho - 1.0) * (1.0 - s) * np.asarray(d_s) + eps * (1.0 - x) * np.asarray(d_x)
    composed = np.asarray(markup_elasticity(shares, SP, CP))
    assert np.abs(direct - composed).max() < 1e-12


def test_markup_share_slopes_match_finite_differences():
    s, x = _interior_draws(400)
    h = FD_STEP

    def ln_mu(sv, xv):
        return np.log(np.asarray(bilateral_markup(BilateralShares(s=sv, x=xv), SP, CP).mu))

    d_s, d_x = markup_share_slopes(BilateralShares(s=s, x=x), SP, CP)
    fd_s = (ln_mu(s * np.exp(h), x) - ln_mu(s * np.exp(-h), x)) / (2 * h)
    fd_x = (ln_mu(s, x * np.exp(h)) - ln_mu(s, x * np.exp(-h))) / (2 * h)
    assert _rel_err(fd_s, np.asarray(d_s)).max() < 2e-5
    assert _rel_err(fd_x, np.asarray(d_x)).max() < 1e-6


def test_passthrough_is_reciprocal_of_one_plus_elasticities():
    s, x = _interior_draws(200)
    shares = BilateralShares(s=s, x=x)
    dec = passthrough(shares, SP, CP)
    g = np.asarray(markup_elasticity(shares, SP, CP))
    lam = np.asarray(cost_elasticity(shares, SP, CP))
    assert np.abs(np.asarray(dec.passthrough) - 1.0 / (1.0 + g + lam)).max() < 1e-14
    assert np.abs(np.asarray(dec.passthrough_markup_only) - 1.0 / (1.0 + g)).max() < 1e-14
    assert np.abs(np.asarray(dec.passthrough_cost_only) - 1.0 / (1.0 + lam)).max() < 1e-14


def test_passthrough_complete_when_both_channels_shut():
    # theta = 1 kills the cost channel; s = 0 freezes markup composition in x.
    dec = passthrough(BilateralShares(s=0.0, x=0.3), StructuralParams(phi=0.5, theta=1.0), CP)
    assert dec.markup_elasticity == pytest.approx(0.0, abs=1e-15)
    assert dec.passthrough == pytest.approx(1.0, abs=1e-14)


def test_passthrough_strictly_decreasing_in_x_when_theta_below_one():
    grid = heatmap_grid(StructuralParams(phi=0.5, theta=0.5), CP, n=101)
    piv = grid.pivot(index="s", columns="x", values="phi").to_numpy()
    assert np.all(np.diff(piv, axis=1) < 0.0)


def test_passthrough_constant_in_x_when_theta_one():
    grid = heatmap_grid(StructuralParams(phi=0.5, theta=1.0), CP, n=101)
    piv = grid.pivot(index="s", columns="x", values="phi").to_numpy()
    assert np.abs(piv - piv[:, :1]).max() <= 1e-12


def test_passthrough_nondecreasing_in_phi_away_from_share_boundaries():
    # The phi-ordering genuinely reverses in thin slivers at s -> 1 (the
    # bargaining-weight elasticity turns negative past the lambda peak) and at
    # x = 1 under decreasing returns; monotonicity holds on s <= 0.95, x <= 0.98.
    for theta in (0.5, 1.0):
        grids = [
            heatmap_grid(StructuralParams(phi=p, theta=theta), CP, n=41)
            for p in (0.001, 0.5, 0.999)
        ]
        keep = (grids[0]["s"] <= 0.95) & (grids[0]["x"] <= 0.98)
        lo, mid, hi = (g.loc[keep, "phi"].to_numpy() for g in grids)
        assert np.all(mid - lo >= -1e-12)
        assert np.all(hi - mid >= -1e-12)


def test_passthrough_phi_ordering_reverses_on_boundary_slivers():
    # Documented exceptions to the phi-monotonicity pattern.
    sh = BilateralShares(s=0.99, x=0.3)
    lo = passthrough(sh, StructuralParams(phi=0.001, theta=1.0), CP).passthrough
    mid = passthrough(sh, StructuralParams(phi=0.5, theta=1.0), CP).passthrough
    assert mid < lo
    sh_x1 = BilateralShares(s=0.35, x=1.0)
    mid_x = passthrough(sh_x1, StructuralParams(phi=0.5, theta=0.5), CP).passthrough
    hi_x = passthrough(sh_x1, StructuralParams(phi=0.999, theta=0.5), CP).passthrough
    assert hi_x < mid_x


def test_heatmap_grid_schema_and_consistency():
    grid = heatmap_grid(SP, CP, n=11)
    assert list(grid.columns) == ["s", "x", "phi", "gamma", "lambda_elas", "mu"]
    assert len(grid) == 121
    assert np.isfinite(grid.to_numpy()).all()
    row = grid.iloc[37]
    shares = BilateralShares(s=row["s"], x=row["x"])
    assert row["phi"] == pytest.approx(passthrough(shares, SP, CP).passthrough, abs=1e-14)
    assert row["mu"] == pytest.approx(bilateral_markup(shares, SP, CP).mu, abs=1e-14)
