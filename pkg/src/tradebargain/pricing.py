"""Bilateral markups and pass-through elasticities for two-sided trade pricing.

A transaction price between an exporter and an importer splits into an
oligopoly markup (seller side), an oligopsony markdown (buyer side), and a
bargaining weight that mixes the two. Every function here is a closed form in
the bilateral shares (s, x), the demand calibration, and the structural
bargaining parameters. Endpoints of the share domain are handled by analytic
limits, never by raw division, so grids may include s, x in {0, 1} exactly.

Shapes: share arguments accept scalars or numpy arrays and broadcast against
each other; outputs match the broadcast shape (python floats for all-scalar
input).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import pandas as pd

from .errors import (
    InfeasibleOutsideOptionError,
    ParameterDomainError,
    UnboundedMarkupError,
)

__all__ = [
    "CalibratedParams",
    "StructuralParams",
    "BilateralShares",
    "MarkupDecomposition",
    "ElasticityDecomposition",
    "GeneralizedOutsideOption",
    "GeneralizedMarkup",
    "derive_eta",
    "residual_demand_elasticity",
    "oligopoly_markup",
    "oligopsony_markdown",
    "lambda_components",
    "bargaining_weight",
    "bilateral_markup",
    "gamma_oligopoly",
    "gamma_oligopsony",
    "gamma_omega",
    "markup_elasticity",
    "cost_elasticity",
    "markup_share_slopes",
    "passthrough",
    "heatmap_grid",
    "efficient_bargain_price",
    "generalized_markup",
]


def derive_eta(nu: float, gamma: float, varrho: float = 1.0) -> float:
    """Elasticity of demand for the foreign input bundle.

    Derived from the downstream demand elasticity ``nu``, the foreign revenue
    share ``gamma``, and the returns-to-scale parameter ``varrho``:
    ``eta = 1 + gamma*(nu - 1)/(varrho + nu*(1 - varrho))``.

    Raises
    ------
    ParameterDomainError
        If the denominator ``varrho + nu*(1 - varrho)`` is not positive.
    """
    den = varrho + nu * (1.0 - varrho)
    if den <= 0.0:
        raise ParameterDomainError(
            f"varrho + nu*(1 - varrho) = {den:g} must be positive"
        )
    return 1.0 + gamma * (nu - 1.0) / den


@dataclass(frozen=True)
class CalibratedParams:
    """Demand-side calibration.

    ``eta`` may be passed explicitly; when omitted it is derived from
    ``(nu, gamma, varrho)``. Requires ``rho > eta > 1`` so that residual
    demand is elastic everywhere on the share domain.
    """

    nu: float
    gamma: float
    rho: float
    varrho: float = 1.0
    eta: float = field(default=float("nan"))

    def __post_init__(self) -> None:
        if not (self.nu > 1.0):
            raise ParameterDomainError(f"nu = {self.nu:g} must exceed 1")
        if not (0.0 < self.gamma <= self.varrho):
            raise ParameterDomainError(
                f"gamma = {self.gamma:g} must lie in (0, varrho]"
            )
        if not (0.0 < self.varrho <= 1.0):
            raise ParameterDomainError(f"varrho = {self.varrho:g} must lie in (0, 1]")
        if np.isnan(self.eta):
            object.__setattr__(self, "eta", derive_eta(self.nu, self.gamma, self.varrho))
        if not (self.eta > 1.0):
            raise ParameterDomainError(f"eta = {self.eta:g} must exceed 1")
        if not (self.rho > self.eta):
            raise ParameterDomainError(
                f"rho = {self.rho:g} must exceed eta = {self.eta:g}"
            )

    @property
    def share_curvature(self) -> float:
        """Exponent ``(eta - 1)/(rho - 1)``, strictly inside (0, 1)."""
        return (self.eta - 1.0) / (self.rho - 1.0)


@dataclass(frozen=True)
class StructuralParams:
    """Bargaining weight ``phi`` in (0, 1) and cost curvature ``theta`` in (0, 1]."""

    phi: float
    theta: float

    def __post_init__(self) -> None:
        if not (0.0 < self.phi < 1.0):
            raise ParameterDomainError(f"phi = {self.phi:g} must lie in (0, 1)")
        if not (0.0 < self.theta <= 1.0):
            raise ParameterDomainError(f"theta = {self.theta:g} must lie in (0, 1]")


@dataclass(frozen=True)
class BilateralShares:
    """Supplier share ``s`` (within the buyer) and buyer share ``x`` (within the seller).

    Both entries may be scalars or arrays; they must broadcast and lie in
    [0, 1] elementwise.
    """

    s: object
    x: object

    def __post_init__(self) -> None:
        s = np.asarray(self.s, dtype=np.float64)
        x = np.asarray(self.x, dtype=np.float64)
        if np.any((s < 0.0) | (s > 1.0)) or np.any(np.isnan(s)):
            raise ParameterDomainError("supplier shares s must lie in [0, 1]")
        if np.any((x < 0.0) | (x > 1.0)) or np.any(np.isnan(x)):
            raise ParameterDomainError("buyer shares x must lie in [0, 1]")
        np.broadcast_shapes(s.shape, x.shape)


class MarkupDecomposition(NamedTuple):
    """Level decomposition of the bilateral markup."""

    mu_oligopoly: object
    mu_oligopsony: object
    lam: object
    lambda_cost_exposure: object
    lambda_network_dependence: object
    omega: object
    mu: object


class ElasticityDecomposition(NamedTuple):
    """Log-elasticity decomposition behind the pass-through rate."""

    epsilon: object
    gamma_oligopoly: object
    gamma_oligopsony: object
    gamma_omega: object
    omega_gamma: object
    markup_elasticity: object
    cost_elasticity: object
    passthrough: object
    passthrough_markup_only: object
    passthrough_cost_only: object


@dataclass(frozen=True)
class GeneralizedOutsideOption:
    """Disagreement cost ratios: exporter side ``delta_ci``, importer side ``delta_cj``."""

    delta_ci: object
    delta_cj: object


class GeneralizedMarkup(NamedTuple):
    """Markup decomposition under user-supplied outside options."""

    mu_oligopoly: object
    mu_oligopsony: object
    delta_s: object
    lam: object
    omega: object
    mu: object


def _is_scalar(*vals: object) -> bool:
    return all(np.ndim(v) == 0 for v in vals)


def _ret(out: np.ndarray, scalar: bool):
    return float(out) if scalar else out


def residual_demand_elasticity(s, params: CalibratedParams):
    """Residual demand elasticity ``epsilon = (1 - s)*rho + s*eta``."""
    scalar = _is_scalar(s)
    s = np.asarray(s, dtype=np.float64)
    return _ret((1.0 - s) * params.rho + s * params.eta, scalar)


def oligopoly_markup(s, params: CalibratedParams):
    """Seller-side markup ``epsilon/(epsilon - 1)``.

    Raises
    ------
    UnboundedMarkupError
        If residual demand is weakly inelastic (``epsilon <= 1``) anywhere.
    """
    scalar = _is_scalar(s)
    eps = np.asarray(residual_demand_elasticity(s, params), dtype=np.float64)
    if np.any(eps <= 1.0):
        raise UnboundedMarkupError(
            "residual demand elasticity must exceed 1 for a finite markup"
        )
    return _ret(eps / (eps - 1.0), scalar)


def _one_minus_pow(base_complement, exponent: float) -> np.ndarray:
    # 1 - (1 - t)^a evaluated as -expm1(a*log1p(-t)); exact at t == 1.
    t = np.asarray(base_complement, dtype=np.float64)
    out = np.empty_like(t)
    top = t >= 1.0
    out[top] = 1.0
    safe = ~top
    out[safe] = -np.expm1(exponent * np.log1p(-t[safe]))
    return out


def oligopsony_markdown(x, theta: float):
    """Buyer-side markdown ``theta*(1 - (1 - x)^(1/theta))/x``.

    Lies in [theta, 1]; equals 1 at x = 0 or theta = 1 and theta at x = 1.
    """
    scalar = _is_scalar(x)
    x = np.asarray(x, dtype=np.float64)
    if theta == 1.0:
        return _ret(np.ones_like(x), scalar)
    a = 1.0 / theta
    out = np.empty_like(x)
    zero = x == 0.0
    out[zero] = 1.0
    pos = ~zero
    out[pos] = theta * _one_minus_pow(x[pos], a) / x[pos]
    return _ret(out, scalar)


def _markdown_log_slope(x, theta: float) -> np.ndarray:
    # d ln(markdown)/d ln x = x*a*(1-x)^(a-1)/(1-(1-x)^a) - 1; 0 at x=0, -1 at x=1.
    x = np.asarray(x, dtype=np.float64)
    if theta == 1.0:
        return np.zeros_like(x)
    a = 1.0 / theta
    out = np.empty_like(x)
    zero = x == 0.0
    one = x == 1.0
    out[zero] = 0.0
    out[one] = -1.0
    mid = ~(zero | one)
    xm = x[mid]
    out[mid] = xm * a * (1.0 - xm) ** (a - 1.0) / _one_minus_pow(xm, a) - 1.0
    return out


def lambda_components(s, params: CalibratedParams):
    """Cost-exposure and network-dependence factors of the profit sensitivity.

    Returns ``(lambda_cost_exposure, lambda_network_dependence, lam)`` where
    ``lam`` is their product. The first factor is ``(eta - 1)*s/(epsilon - 1)``,
    the second ``1/(1 - (1 - s)^b)`` with ``b = (eta - 1)/(rho - 1)``. The
    product tends to 1 at both s = 0 and s = 1.
    """
    scalar = _is_scalar(s)
    s = np.asarray(s, dtype=np.float64)
    eps = (1.0 - s) * params.rho + s * params.eta
    b = params.share_curvature
    lam_c = (params.eta - 1.0) * s / (eps - 1.0)
    lam_n = np.empty_like(s)
    lam = np.empty_like(s)
    f = _one_minus_pow(s, b)
    # Subnormal f would overflow the reciprocal; those cells are the s -> 0
    # limit where lam -> 1.
    zero = f < np.finfo(np.float64).tiny
    lam_n[zero] = np.inf
    lam[zero] = 1.0
    pos = ~zero
    lam_n[pos] = 1.0 / f[pos]
    lam[pos] = lam_c[pos] / f[pos]
    return _ret(lam_c, scalar), _ret(lam_n, scalar), _ret(lam, scalar)


def bargaining_weight(lam, phi):
    """Effective weight on the buyer-side markdown: ``phi*lam/(1 - phi + phi*lam)``."""
    scalar = _is_scalar(lam, phi)
    lam = np.asarray(lam, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    return _ret(phi * lam / ((1.0 - phi) + phi * lam), scalar)


def bilateral_markup(
    shares: BilateralShares, sp: StructuralParams, cp: CalibratedParams
) -> MarkupDecomposition:
    """Full markup decomposition at bilateral shares ``(s, x)``.

    ``mu = (1 - omega)*mu_oligopoly + omega*mu_oligopsony`` with
    ``omega = bargaining_weight(lam, phi)``. ``phi`` may be an array (pairwise
    heterogeneous bargaining weights) broadcasting against the shares.
    """
    scalar = _is_scalar(shares.s, shares.x, sp.phi)
    s = np.asarray(shares.s, dtype=np.float64)
    x = np.asarray(shares.x, dtype=np.float64)
    mu_o = oligopoly_markup(s, cp)
    mu_d = oligopsony_markdown(x, sp.theta)
    lam_c, lam_n, lam = lambda_components(s, cp)
    omega = bargaining_weight(lam, sp.phi)
    mu = (1.0 - omega) * mu_o + omega * mu_d
    bc = np.broadcast(s, x, np.asarray(sp.phi))
    as_out = lambda v: _ret(np.broadcast_to(np.asarray(v, dtype=np.float64), bc.shape).copy(), scalar)
    return MarkupDecomposition(
        mu_oligopoly=as_out(mu_o),
        mu_oligopsony=as_out(mu_d),
        lam=as_out(lam),
        lambda_cost_exposure=as_out(lam_c),
        lambda_network_dependence=as_out(lam_n),
        omega=as_out(omega),
        mu=as_out(mu),
    )


def gamma_oligopoly(s, cp: CalibratedParams):
    """Oligopoly-markup elasticity ``s*(rho - eta)*(rho - 1)*(1 - s)/(epsilon*(epsilon - 1))``.

    Nonnegative; vanishes at s = 0 and s = 1.
    """
    scalar = _is_scalar(s)
    s = np.asarray(s, dtype=np.float64)
    eps = (1.0 - s) * cp.rho + s * cp.eta
    out = s * (cp.rho - cp.eta) * (cp.rho - 1.0) * (1.0 - s) / (eps * (eps - 1.0))
    return _ret(out, scalar)


def gamma_oligopsony(shares: BilateralShares, sp: StructuralParams, cp: CalibratedParams):
    """Oligopsony-markdown elasticity; nonpositive, zero at theta = 1 and at x in {0, 1}."""
    scalar = _is_scalar(shares.s, shares.x)
    s = np.asarray(shares.s, dtype=np.float64)
    x = np.asarray(shares.x, dtype=np.float64)
    eps = (1.0 - s) * cp.rho + s * cp.eta
    out = _markdown_log_slope(x, sp.theta) * (1.0 - x) * eps
    return _ret(np.broadcast_to(out, np.broadcast(s, x).shape).copy(), scalar)


def _lambda_log_slope_times_1ms(s, cp: CalibratedParams) -> np.ndarray:
    # (1 - s)*d ln lam/d ln s, evaluated stably; 0 at both endpoints.
    s = np.asarray(s, dtype=np.float64)
    eps = (1.0 - s) * cp.rho + s * cp.eta
    b = cp.share_curvature
    out = np.empty_like(s)
    zero = s == 0.0
    one = s == 1.0
    out[zero] = 0.0
    out[one] = 0.0
    mid = ~(zero | one)
    sm = s[mid]
    f = _one_minus_pow(sm, b)
    out[mid] = (1.0 - sm) * (1.0 + sm * (cp.rho - cp.eta) / (eps[mid] - 1.0)) - (
        b * sm * (1.0 - sm) ** b / f
    )
    return out


def gamma_omega(shares: BilateralShares, sp: StructuralParams, cp: CalibratedParams):
    """Bargaining-weight elasticity ``-d ln omega/d ln p = (1 - omega)*(rho - 1)*(1 - s)*d ln lam/d ln s``.

    Crosses zero where ``lam`` peaks in s; vanishes at s = 0 and s = 1.
    ``phi`` may be an array.
    """
    scalar = _is_scalar(shares.s, shares.x, sp.phi)
    s = np.asarray(shares.s, dtype=np.float64)
    _, _, lam = lambda_components(s, cp)
    omega = bargaining_weight(lam, sp.phi)
    out = (1.0 - omega) * (cp.rho - 1.0) * _lambda_log_slope_times_1ms(s, cp)
    return _ret(out, scalar)


def markup_elasticity(shares: BilateralShares, sp: StructuralParams, cp: CalibratedParams):
    """Composite markup elasticity ``Gamma = -d ln mu/d ln p`` along the demand response."""
    scalar = _is_scalar(shares.s, shares.x, sp.phi)
    dec = bilateral_markup(shares, sp, cp)
    g_o = np.asarray(gamma_oligopoly(shares.s, cp), dtype=np.float64)
    g_d = np.asarray(gamma_oligopsony(shares, sp, cp), dtype=np.float64)
    g_w = np.asarray(gamma_omega(shares, sp, cp), dtype=np.float64)
    mu = np.asarray(dec.mu, dtype=np.float64)
    mu_o = np.asarray(dec.mu_oligopoly, dtype=np.float64)
    omega_gamma = np.asarray(dec.omega, dtype=np.float64) * np.asarray(dec.mu_oligopsony, dtype=np.float64) / mu
    out = (1.0 - omega_gamma) * g_o + omega_gamma * g_d + (1.0 - mu_o / mu) * g_w
    return _ret(out, scalar)


def cost_elasticity(shares: BilateralShares, sp: StructuralParams, cp: CalibratedParams):
    """Marginal-cost feedback ``Lambda = (1 - theta)/theta * x * epsilon``; zero at theta = 1."""
    scalar = _is_scalar(shares.s, shares.x)
    s = np.asarray(shares.s, dtype=np.float64)
    x = np.asarray(shares.x, dtype=np.float64)
    if sp.theta == 1.0:
        out = np.zeros(np.broadcast(s, x).shape)
        return _ret(out, scalar)
    eps = (1.0 - s) * cp.rho + s * cp.eta
    return _ret((1.0 - sp.theta) / sp.theta * x * eps, scalar)


def markup_share_slopes(shares: BilateralShares, sp: StructuralParams, cp: CalibratedParams):
    """Partial elasticities ``(d ln mu/d ln s, d ln mu/d ln x)`` at fixed prices elsewhere.

    These are the building blocks of the network-wide pass-through system; the
    own-price elasticity decomposition follows from them via the share
    responses ``d ln s/d ln p = -(rho - 1)*(1 - s)`` and
    ``d ln x/d ln p = -epsilon*(1 - x)``.
    """
    scalar = _is_scalar(shares.s, shares.x, sp.phi)
    s = np.asarray(shares.s, dtype=np.float64)
    x = np.asarray(shares.x, dtype=np.float64)
    dec = bilateral_markup(shares, sp, cp)
    mu = np.asarray(dec.mu, dtype=np.float64)
    mu_o = np.asarray(dec.mu_oligopoly, dtype=np.float64)
    mu_d = np.asarray(dec.mu_oligopsony, dtype=np.float64)
    omega = np.asarray(dec.omega, dtype=np.float64)
    eps = (1.0 - s) * cp.rho + s * cp.eta

    slope_mu_o = s * (cp.rho - cp.eta) / (eps * (eps - 1.0))
    lam_slope_1ms = _lambda_log_slope_times_1ms(s, cp)
    with np.errstate(divide="ignore", invalid="ignore"):
        lam_slope = np.where(s == 1.0, np.nan, lam_slope_1ms / (1.0 - s))
    # At s = 1 the lambda slope diverges but always enters multiplied by (1 - s);
    # expose the raw slope only away from that endpoint.
    d_s = ((1.0 - omega) * mu_o * slope_mu_o + (mu_d - mu_o) * omega * (1.0 - omega) * lam_slope) / mu
    d_x = omega * mu_d * _markdown_log_slope(x, sp.theta) / mu
    bc = np.broadcast(s, x, np.asarray(sp.phi))
    d_s = np.broadcast_to(d_s, bc.shape).copy()
    d_x = np.broadcast_to(d_x, bc.shape).copy()
    return _ret(d_s, scalar), _ret(d_x, scalar)


def _markup_slope_s_times_1ms(
    shares: BilateralShares, sp: StructuralParams, cp: CalibratedParams
) -> np.ndarray:
    # (1 - s)*d ln mu/d ln s, stable at s = 1 where the raw slope diverges.
    s = np.asarray(shares.s, dtype=np.float64)
    dec = bilateral_markup(shares, sp, cp)
    mu = np.asarray(dec.mu, dtype=np.float64)
    mu_o = np.asarray(dec.mu_oligopoly, dtype=np.float64)
    mu_d = np.asarray(dec.mu_oligopsony, dtype=np.float64)
    omega = np.asarray(dec.omega, dtype=np.float64)
    eps = (1.0 - s) * cp.rho + s * cp.eta
    slope_mu_o = s * (cp.rho - cp.eta) / (eps * (eps - 1.0))
    out = (
        (1.0 - omega) * mu_o * slope_mu_o * (1.0 - s)
        + (mu_d - mu_o) * omega * (1.0 - omega) * _lambda_log_slope_times_1ms(s, cp)
    ) / mu
    return out


def passthrough(
    shares: BilateralShares, sp: StructuralParams, cp: CalibratedParams
) -> ElasticityDecomposition:
    """Pass-through rate ``Phi = 1/(1 + Gamma + Lambda)`` with its full decomposition.

    ``passthrough_markup_only`` shuts the cost channel (``1/(1 + Gamma)``);
    ``passthrough_cost_only`` shuts the markup channel (``1/(1 + Lambda)``).
    """
    scalar = _is_scalar(shares.s, shares.x, sp.phi)
    dec = bilateral_markup(shares, sp, cp)
    eps = residual_demand_elasticity(shares.s, cp)
    g_o = gamma_oligopoly(shares.s, cp)
    g_d = gamma_oligopsony(shares, sp, cp)
    g_w = gamma_omega(shares, sp, cp)
    lam_e = cost_elasticity(shares, sp, cp)
    mu = np.asarray(dec.mu, dtype=np.float64)
    omega_gamma = np.asarray(dec.omega) * np.asarray(dec.mu_oligopsony) / mu
    g = (
        (1.0 - omega_gamma) * np.asarray(g_o)
        + omega_gamma * np.asarray(g_d)
        + (1.0 - np.asarray(dec.mu_oligopoly) / mu) * np.asarray(g_w)
    )
    lam_arr = np.asarray(lam_e, dtype=np.float64)
    phi_full = 1.0 / (1.0 + g + lam_arr)
    phi_markup = 1.0 / (1.0 + g)
    phi_cost = 1.0 / (1.0 + lam_arr)
    bc_shape = np.broadcast(
        np.asarray(shares.s), np.asarray(shares.x), np.asarray(sp.phi)
    ).shape
    expand = lambda v: _ret(
        np.broadcast_to(np.asarray(v, dtype=np.float64), bc_shape).copy(), scalar
    )
    return ElasticityDecomposition(
        epsilon=expand(eps),
        gamma_oligopoly=expand(g_o),
        gamma_oligopsony=expand(g_d),
        gamma_omega=expand(g_w),
        omega_gamma=expand(omega_gamma),
        markup_elasticity=expand(g),
        cost_elasticity=expand(lam_arr),
        passthrough=expand(phi_full),
        passthrough_markup_only=expand(phi_markup),
        passthrough_cost_only=expand(phi_cost),
    )


def heatmap_grid(
    sp: StructuralParams, cp: CalibratedParams, n: int = 101
) -> pd.DataFrame:
    """Dense (s, x) grid of pass-through and markup objects on the closed unit square.

    Returns a long-format frame with columns ``s, x, phi, gamma, lambda_elas, mu``
    where ``phi`` is the pass-through rate, ``gamma`` the composite markup
    elasticity, and ``lambda_elas`` the cost-feedback elasticity.
    """
    if n < 2:
        raise ParameterDomainError("grid needs at least 2 points per axis")
    axis = np.linspace(0.0, 1.0, n)
    s, x = np.meshgrid(axis, axis, indexing="ij")
    shares = BilateralShares(s=s.ravel(), x=x.ravel())
    dec = passthrough(shares, sp, cp)
    mu = bilateral_markup(shares, sp, cp).mu
    return pd.DataFrame(
        {
            "s": s.ravel(),
            "x": x.ravel(),
            "phi": np.asarray(dec.passthrough),
            "gamma": np.asarray(dec.markup_elasticity),
            "lambda_elas": np.asarray(dec.cost_elasticity),
            "mu": np.asarray(mu),
        }
    )


def efficient_bargain_price(marginal_cost, sp: StructuralParams):
    """Bilaterally efficient price ``(1 - phi)*MC + phi*AC`` with ``AC = theta*MC``."""
    scalar = _is_scalar(marginal_cost)
    mc = np.asarray(marginal_cost, dtype=np.float64)
    return _ret(mc * (1.0 - sp.phi * (1.0 - sp.theta)), scalar)


def generalized_markup(
    shares: BilateralShares,
    sp: StructuralParams,
    cp: CalibratedParams,
    outside: GeneralizedOutsideOption,
) -> GeneralizedMarkup:
    """Markup under user-supplied disagreement cost ratios.

    ``delta_ci`` is the exporter's marginal-cost ratio after losing the match
    (baseline: ``(1 - x)**((1 - theta)/theta)``); ``delta_cj`` the importer's
    (baseline: ``(1 - s)**((eta - 1)/((rho - 1)*(1 - nu)))``, which exceeds 1).
    The oligopsony side becomes ``theta*(1 - delta_ci*(1 - x))/x`` and the
    profit-sensitivity weight ``gamma*s*(nu - 1)/(delta_s*(epsilon - 1))`` with
    ``delta_s = 1 - delta_cj**(1 - nu)``.

    Raises
    ------
    InfeasibleOutsideOptionError
        If ``delta_s <= 0`` (importer would not lose from disagreement) or the
        exporter-side savings are nonpositive.
    ParameterDomainError
        At x = 0 with ``delta_ci != 1`` (per-unit savings unbounded).
    """
    scalar = _is_scalar(shares.s, shares.x, outside.delta_ci, outside.delta_cj)
    s = np.asarray(shares.s, dtype=np.float64)
    x = np.asarray(shares.x, dtype=np.float64)
    d_ci = np.asarray(outside.delta_ci, dtype=np.float64)
    d_cj = np.asarray(outside.delta_cj, dtype=np.float64)
    s, x, d_ci, d_cj = np.broadcast_arrays(
        *(np.atleast_1d(v) for v in (s, x, d_ci, d_cj))
    )

    if np.any((x == 0.0) & (d_ci != 1.0)):
        raise ParameterDomainError(
            "x = 0 with delta_ci != 1 makes per-unit disagreement savings unbounded"
        )
    saved = (1.0 - d_ci) + d_ci * x
    # x = 0 with delta_ci = 1 is the removable 0/0 limit (markdown -> theta),
    # not an infeasible outside option.
    if np.any((saved <= 0.0) & ~((x == 0.0) & (d_ci == 1.0))):
        raise InfeasibleOutsideOptionError(
            "exporter disagreement savings 1 - delta_ci*(1 - x) must be positive"
        )
    mu_d = np.where(x == 0.0, sp.theta, sp.theta * saved / np.where(x == 0.0, 1.0, x))

    with np.errstate(invalid="ignore"):
        delta_s = -np.expm1((1.0 - cp.nu) * np.log(d_cj))
    if np.any(~(delta_s > 0.0)):
        raise InfeasibleOutsideOptionError(
            "importer profit loss share 1 - delta_cj**(1 - nu) must be positive"
        )

    eps = (1.0 - s) * cp.rho + s * cp.eta
    mu_o = eps / (eps - 1.0)
    lam = cp.gamma * s * (cp.nu - 1.0) / (delta_s * (eps - 1.0))
    omega = bargaining_weight(lam, sp.phi)
    mu = (1.0 - omega) * mu_o + omega * mu_d

    sq = lambda v: _ret(np.squeeze(v) if scalar else v, scalar)
    return GeneralizedMarkup(
        mu_oligopoly=sq(mu_o),
        mu_oligopsony=sq(mu_d),
        delta_s=sq(delta_s),
        lam=sq(lam),
        omega=sq(omega),
        mu=sq(mu),
    )
