"""Efficient-bargain pricing and generalized outside options."""

import numpy as np
import pytest

from tradebargain import (
    BilateralShares,
    CalibratedParams,
    GeneralizedOutsideOption,
    InfeasibleOutsideOptionError,
    ParameterDomainError,
    StructuralParams,
    bilateral_markup,
    efficient_bargain_price,
    generalized_markup,
    residual_demand_elasticity,
)

CP = CalibratedParams(nu=4.0, gamma=0.5, rho=10.0, varrho=1.0)
SP = StructuralParams(phi=0.827, theta=0.454)


def test_efficient_price_mixes_marginal_and_average_cost():
    # (1-phi)*MC + phi*AC with AC = theta*MC.
    assert efficient_bargain_price(2.0, SP) == pytest.approx(
        2.0 * ((1 - SP.phi) + SP.phi * SP.theta), abs=1e-14
    )
    sp1 = StructuralParams(phi=0.3, theta=1.0)
    assert efficient_bargain_price(5.0, sp1) == 5.0


def _baseline_outside(s, x, cp, theta):
    d_ci = (1.0 - x) ** ((1.0 - theta) / theta)
    d_cj = (1.0 - s) ** ((cp.eta - 1.0) / ((cp.rho - 1.0) * (1.0 - cp.nu)))
    return GeneralizedOutsideOption(delta_ci=d_ci, delta_cj=d_cj)


def test_generalized_markup_reduces_to_baseline():
    # Baseline cost ratios must reproduce the closed-form markup exactly
    # (the weight reduction needs varrho = 1, where eta - 1 = gamma*(nu - 1)).
    rng = np.random.default_rng(7)
    s = rng.uniform(0.02, 0.98, 50)
    x = rng.uniform(0.02, 0.98, 50)
    shares = BilateralShares(s=s, x=x)
    gen = generalized_markup(shares, SP, CP, _baseline_outside(s, x, CP, SP.theta))
    base = bilateral_markup(shares, SP, CP)
    assert np.abs(np.asarray(gen.mu) - np.asarray(base.mu)).max() < 1e-10
    assert np.abs(np.asarray(gen.mu_oligopsony) - np.asarray(base.mu_oligopsony)).max() < 1e-10
    assert np.abs(np.asarray(gen.lam) - np.asarray(base.lam)).max() < 1e-10


def test_generalized_markdown_with_unit_cost_ratio_is_average_cost_fallback():
    # delta_ci = 1 keeps the exporter's cost level: per-unit savings equal
    # average cost, so the markdown is theta for every x (1 when theta = 1).
    for x in (0.3, 1e-9, 0.0):
        gen = generalized_markup(
            BilateralShares(s=0.4, x=x), SP, CP,
            GeneralizedOutsideOption(delta_ci=1.0, delta_cj=1.5),
        )
        assert gen.mu_oligopsony == pytest.approx(SP.theta, abs=1e-12)
    sp1 = StructuralParams(phi=0.827, theta=1.0)
    gen1 = generalized_markup(
        BilateralShares(s=0.4, x=1e-12), sp1, CP,
        GeneralizedOutsideOption(delta_ci=1.0, delta_cj=1.5),
    )
    assert gen1.mu_oligopsony == pytest.approx(1.0, abs=1e-12)


def test_generalized_markup_rejects_zero_buyer_share_with_cost_gap():
    with pytest.raises(ParameterDomainError):
        generalized_markup(
            BilateralShares(s=0.4, x=0.0), SP, CP,
            GeneralizedOutsideOption(delta_ci=0.9, delta_cj=1.5),
        )


def test_generalized_markup_rejects_infeasible_importer_outside_option():
    # delta_cj <= 1 means the importer would not lose from disagreement.
    for d in (1.0, 0.8):
        with pytest.raises(InfeasibleOutsideOptionError):
            generalized_markup(
                BilateralShares(s=0.4, x=0.3), SP, CP,
                GeneralizedOutsideOption(delta_ci=0.9, delta_cj=d),
            )


def test_generalized_markup_rejects_negative_exporter_savings():
    # Large delta_ci at small x: disagreement would lower unit cost.
    with pytest.raises(InfeasibleOutsideOptionError):
        generalized_markup(
            BilateralShares(s=0.4, x=0.1), SP, CP,
            GeneralizedOutsideOption(delta_ci=1.5, delta_cj=1.5),
        )


def test_generalized_weight_bounded_as_importer_option_degrades():
    # delta_cj -> inf: profit loss share -> 1, weight tends to
    # gamma*s*(nu-1)/(eps-1).
    s, x = 0.4, 0.3
    gen = generalized_markup(
        BilateralShares(s=s, x=x), SP, CP,
        GeneralizedOutsideOption(delta_ci=0.9, delta_cj=1e12),
    )
    eps = residual_demand_elasticity(s, CP)
    lam_limit = CP.gamma * s * (CP.nu - 1.0) / (eps - 1.0)
    assert gen.delta_s == pytest.approx(1.0, abs=1e-12)
    assert gen.lam == pytest.approx(lam_limit, rel=1e-10)
    assert 0.0 < gen.omega < 1.0


def test_generalized_delta_s_formula():
    gen = generalized_markup(
        BilateralShares(s=0.4, x=0.3), SP, CP,
        GeneralizedOutsideOption(delta_ci=0.9, delta_cj=1.5),
    )
    assert gen.delta_s == pytest.approx(1.0 - 1.5 ** (1.0 - CP.nu), rel=1e-13)
