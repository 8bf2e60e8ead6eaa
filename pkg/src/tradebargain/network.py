"""Nash-in-Nash price equilibrium on a fixed bipartite trade network.

Exporters supply one product to their connected importers. Each bilateral
price must equal the bargained markup at the pair's realized shares times the
exporter's marginal cost and the gross tariff, while quantities and shares
come from the CES input-demand system given all prices. The solver iterates
damped log-price updates until both requirements hold simultaneously.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
import pandas as pd
from scipy.optimize import brentq

from .errors import (
    ConvergenceError,
    DataSchemaError,
    ParameterDomainError,
    SingularSystemError,
)
from .pricing import (
    BilateralShares,
    CalibratedParams,
    StructuralParams,
    _markup_slope_s_times_1ms,
    bilateral_markup,
    cost_elasticity,
    markup_elasticity,
    markup_share_slopes,
    residual_demand_elasticity,
)

__all__ = [
    "Exporter",
    "Importer",
    "Edge",
    "TradeNetwork",
    "SolverConfig",
    "EquilibriumState",
    "solve_equilibrium",
    "direct_passthrough_fd",
    "full_passthrough_system",
    "network_to_json",
    "network_from_json",
    "save_network",
    "load_network",
]

STATE_COLUMNS = [
    "exporter_id",
    "importer_id",
    "taste",
    "tariff",
    "price",
    "quantity",
    "supplier_share",
    "buyer_share",
    "exporter_output",
    "exporter_marginal_cost",
    "importer_price_index",
    "importer_input_bundle",
    "importer_output",
    "importer_unit_cost",
]


def _require_positive(value: float, what: str) -> None:
    if not (math.isfinite(value) and value > 0.0):
        raise ParameterDomainError(f"{what} must be finite and positive, got {value!r}")


@dataclass(frozen=True)
class Exporter:
    """Supplier node with cost shifter k in marginal cost k*q**((1 - theta)/theta)."""

    exporter_id: str
    cost_shifter: float = 1.0

    def __post_init__(self) -> None:
        _require_positive(self.cost_shifter, "cost_shifter")


@dataclass(frozen=True)
class Importer:
    """Buyer node: productivity, downstream demand shifter, domestic input price."""

    importer_id: str
    productivity: float = 1.0
    demand_shifter: float = 1.0
    domestic_price: float = 1.0

    def __post_init__(self) -> None:
        _require_positive(self.productivity, "productivity")
        _require_positive(self.demand_shifter, "demand_shifter")
        _require_positive(self.domestic_price, "domestic_price")


@dataclass(frozen=True)
class Edge:
    """Trading pair with CES taste shifter and gross tariff (1 = free trade)."""

    exporter_id: str
    importer_id: str
    taste: float = 1.0
    tariff: float = 1.0

    def __post_init__(self) -> None:
        _require_positive(self.taste, "taste")
        if not (math.isfinite(self.tariff) and self.tariff >= 1.0):
            raise ParameterDomainError(
                f"tariff must be a finite gross factor >= 1, got {self.tariff!r}"
            )


@dataclass(frozen=True)
class TradeNetwork:
    """Bipartite graph of exporters, importers, and trading pairs.

    Every exporter and every importer must appear in at least one edge, edges
    must reference declared nodes, and a pair may trade at most once.
    """

    exporters: tuple
    importers: tuple
    edges: tuple

    def __post_init__(self) -> None:
        object.__setattr__(self, "exporters", tuple(self.exporters))
        object.__setattr__(self, "importers", tuple(self.importers))
        object.__setattr__(self, "edges", tuple(self.edges))
        exp_ids = [e.exporter_id for e in self.exporters]
        imp_ids = [m.importer_id for m in self.importers]
        if len(set(exp_ids)) != len(exp_ids):
            raise DataSchemaError("duplicate exporter ids")
        if len(set(imp_ids)) != len(imp_ids):
            raise DataSchemaError("duplicate importer ids")
        if not self.exporters or not self.importers or not self.edges:
            raise DataSchemaError("network needs at least one exporter, importer, and edge")
        exp_set, imp_set = set(exp_ids), set(imp_ids)
        pairs = set()
        touched_exp, touched_imp = set(), set()
        for e in self.edges:
            if e.exporter_id not in exp_set:
                raise DataSchemaError(f"edge references unknown exporter {e.exporter_id!r}")
            if e.importer_id not in imp_set:
                raise DataSchemaError(f"edge references unknown importer {e.importer_id!r}")
            pair = (e.exporter_id, e.importer_id)
            if pair in pairs:
                raise DataSchemaError(f"duplicate edge {pair!r}")
            pairs.add(pair)
            touched_exp.add(e.exporter_id)
            touched_imp.add(e.importer_id)
        if touched_exp != exp_set:
            raise DataSchemaError(
                f"exporters without any edge: {sorted(exp_set - touched_exp)!r}"
            )
        if touched_imp != imp_set:
            raise DataSchemaError(
                f"importers without any edge: {sorted(imp_set - touched_imp)!r}"
            )

    def exporter_index(self) -> dict:
        return {e.exporter_id: i for i, e in enumerate(self.exporters)}

    def importer_index(self) -> dict:
        return {m.importer_id: j for j, m in enumerate(self.importers)}


@dataclass(frozen=True)
class SolverConfig:
    """Damped fixed-point iteration settings.

    ``sweep`` selects the update order: ``"gauss-seidel"`` refreshes the
    demand system after every single-edge price update, ``"jacobi"`` updates
    all edges simultaneously from one evaluation per iteration.
    """

    damping: float = 0.5
    tol: float = 1e-10
    max_iter: int = 10_000
    sweep: str = "gauss-seidel"

    def __post_init__(self) -> None:
        if not (0.0 < self.damping <= 1.0):
            raise ParameterDomainError(f"damping must be in (0, 1], got {self.damping!r}")
        if not (math.isfinite(self.tol) and self.tol > 0.0):
            raise ParameterDomainError(f"tol must be positive, got {self.tol!r}")
        if self.max_iter < 1:
            raise ParameterDomainError(f"max_iter must be >= 1, got {self.max_iter!r}")
        if self.sweep not in ("gauss-seidel", "jacobi"):
            raise ParameterDomainError(
                f"sweep must be 'gauss-seidel' or 'jacobi', got {self.sweep!r}"
            )


@dataclass
class EquilibriumState:
    """Converged prices with the implied quantities, shares, and node-level aggregates.

    Per-edge arrays align with ``network.edges``; per-node arrays align with
    ``network.exporters`` / ``network.importers``.
    """

    network: TradeNetwork
    price: np.ndarray
    quantity: np.ndarray
    supplier_share: np.ndarray
    buyer_share: np.ndarray
    exporter_output: np.ndarray
    exporter_marginal_cost: np.ndarray
    importer_price_index: np.ndarray
    importer_input_bundle: np.ndarray
    importer_output: np.ndarray
    importer_unit_cost: np.ndarray
    iterations: int = 0
    residual: float = float("nan")

    def edge_position(self, edge) -> int:
        """Resolve an edge given as an integer position or an (exporter, importer) pair."""
        if isinstance(edge, (int, np.integer)):
            if not 0 <= int(edge) < len(self.network.edges):
                raise KeyError(f"edge position {edge!r} out of range")
            return int(edge)
        exporter_id, importer_id = edge
        for pos, e in enumerate(self.network.edges):
            if e.exporter_id == exporter_id and e.importer_id == importer_id:
                return pos
        raise KeyError(f"no edge {(exporter_id, importer_id)!r} in the network")

    def to_frame(self) -> pd.DataFrame:
        """Edge-keyed table with the per-node aggregates joined on, for CSV dumps."""
        net = self.network
        exp_pos = net.exporter_index()
        imp_pos = net.importer_index()
        ei = np.array([exp_pos[e.exporter_id] for e in net.edges])
        mi = np.array([imp_pos[e.importer_id] for e in net.edges])
        return pd.DataFrame(
            {
                "exporter_id": [e.exporter_id for e in net.edges],
                "importer_id": [e.importer_id for e in net.edges],
                "taste": [e.taste for e in net.edges],
                "tariff": [e.tariff for e in net.edges],
                "price": self.price,
                "quantity": self.quantity,
                "supplier_share": self.supplier_share,
                "buyer_share": self.buyer_share,
                "exporter_output": self.exporter_output[ei],
                "exporter_marginal_cost": self.exporter_marginal_cost[ei],
                "importer_price_index": self.importer_price_index[mi],
                "importer_input_bundle": self.importer_input_bundle[mi],
                "importer_output": self.importer_output[mi],
                "importer_unit_cost": self.importer_unit_cost[mi],
            },
            columns=STATE_COLUMNS,
        )


class _DemandSystem:
    """Vectorized evaluation of the demand block given the full log-price vector."""

    def __init__(self, net: TradeNetwork, sp: StructuralParams, cp: CalibratedParams):
        self.net = net
        self.sp = sp
        self.cp = cp
        exp_pos = net.exporter_index()
        imp_pos = net.importer_index()
        self.n_exp = len(net.exporters)
        self.n_imp = len(net.importers)
        self.e_exp = np.array([exp_pos[e.exporter_id] for e in net.edges])
        self.e_imp = np.array([imp_pos[e.importer_id] for e in net.edges])
        self.taste = np.array([e.taste for e in net.edges])
        self.ln_tariff = np.log([e.tariff for e in net.edges])
        self.taste_rho = self.taste**cp.rho
        self.k = np.array([e.cost_shifter for e in net.exporters])
        self.prod = np.array([m.productivity for m in net.importers])
        self.demand = np.array([m.demand_shifter for m in net.importers])
        p_dom = np.array([m.domestic_price for m in net.importers])
        delta = cp.varrho - cp.gamma
        # Cobb-Douglas domestic branch drops out when gamma exhausts varrho.
        self.dom_factor = (p_dom / delta) ** delta if delta > 0.0 else np.ones(self.n_imp)
        nu = cp.nu
        self.demand_scaled = (nu / (nu - 1.0)) ** (-nu) * self.demand
        self.output_bend = cp.varrho / (cp.varrho + nu * (1.0 - cp.varrho))
        self.cost_curvature = (1.0 - sp.theta) / sp.theta

    def evaluate(self, lnp: np.ndarray) -> dict:
        cp = self.cp
        p = np.exp(lnp)
        w = self.taste_rho * p ** (1.0 - cp.rho)
        bundle = np.bincount(self.e_imp, weights=w, minlength=self.n_imp)
        pf = bundle ** (1.0 / (1.0 - cp.rho))
        kappa = (pf / cp.gamma) ** cp.gamma * self.dom_factor
        m0 = (kappa / self.prod) ** (1.0 / cp.varrho)
        q_imp = (self.demand_scaled * m0 ** (-cp.nu)) ** self.output_bend
        mc_imp = m0 * q_imp ** ((1.0 - cp.varrho) / cp.varrho)
        qf = cp.gamma * mc_imp * q_imp / pf
        s = w / bundle[self.e_imp]
        q_edge = qf[self.e_imp] * self.taste_rho * (p / pf[self.e_imp]) ** (-cp.rho)
        q_exp = np.bincount(self.e_exp, weights=q_edge, minlength=self.n_exp)
        if not (np.all(np.isfinite(q_edge)) and np.all(q_edge > 0.0) and np.all(q_exp > 0.0)):
            raise ParameterDomainError(
                "demand system produced a nonpositive or non-finite quantity"
            )
        c_exp = self.k * q_exp**self.cost_curvature
        x = q_edge / q_exp[self.e_exp]
        return {
            "s": s,
            "x": x,
            "q_edge": q_edge,
            "q_exp": q_exp,
            "c_exp": c_exp,
            "pf": pf,
            "qf": qf,
            "q_imp": q_imp,
            "mc_imp": mc_imp,
        }

    def target_lnp(self, ev: Mapping[str, np.ndarray]) -> np.ndarray:
        mu = bilateral_markup(BilateralShares(ev["s"], ev["x"]), self.sp, self.cp).mu
        return np.log(mu) + np.log(ev["c_exp"][self.e_exp]) + self.ln_tariff

    def target_lnp_at(self, ev: Mapping[str, np.ndarray], pos: int) -> float:
        shares = BilateralShares(float(ev["s"][pos]), float(ev["x"][pos]))
        mu = bilateral_markup(shares, self.sp, self.cp).mu
        return float(
            np.log(mu)
            + np.log(ev["c_exp"][self.e_exp[pos]])
            + self.ln_tariff[pos]
        )

    def step_scale_at(self, ev: Mapping[str, np.ndarray], pos: int) -> float:
        shares = BilateralShares(float(ev["s"][pos]), float(ev["x"][pos]))
        stiffness = 1.0 + float(markup_elasticity(shares, self.sp, self.cp)) + float(
            cost_elasticity(shares, self.sp, self.cp)
        )
        return 1.0 / max(stiffness, 0.25)

    def step_scale(self, ev: Mapping[str, np.ndarray]) -> np.ndarray:
        # The raw update map has slope -(Gamma + Lambda); dividing the step by
        # 1 + Gamma + Lambda keeps damped iteration contractive even when the
        # cost feedback is stiff (Lambda > 1 at calibrated theta). Clamped away
        # from nonpositive values in pathological corners.
        shares = BilateralShares(ev["s"], ev["x"])
        stiffness = 1.0 + np.atleast_1d(
            markup_elasticity(shares, self.sp, self.cp)
        ) + np.atleast_1d(cost_elasticity(shares, self.sp, self.cp))
        return 1.0 / np.maximum(stiffness, 0.25)

    def initial_lnp(self) -> np.ndarray:
        return np.log(self.k[self.e_exp]) + self.ln_tariff

    def state_from(self, lnp: np.ndarray, iterations: int, residual: float) -> EquilibriumState:
        ev = self.evaluate(lnp)
        return EquilibriumState(
            network=self.net,
            price=np.exp(lnp),
            quantity=ev["q_edge"],
            supplier_share=ev["s"],
            buyer_share=ev["x"],
            exporter_output=ev["q_exp"],
            exporter_marginal_cost=ev["c_exp"],
            importer_price_index=ev["pf"],
            importer_input_bundle=ev["qf"],
            importer_output=ev["q_imp"],
            importer_unit_cost=self.cp.varrho * ev["mc_imp"],
            iterations=iterations,
            residual=residual,
        )


def solve_equilibrium(
    net: TradeNetwork,
    sp: StructuralParams,
    cp: CalibratedParams,
    cfg: SolverConfig | None = None,
) -> EquilibriumState:
    """Find prices where every pair's bargain and the demand system agree.

    Iterates ``lnp <- lnp + damping*(ln(mu*c*T) - lnp)`` until the largest
    undamped log-price update falls below ``cfg.tol``. Uniqueness of the fixed
    point is not guaranteed; run both sweeps to probe for multiplicity.

    Raises
    ------
    ConvergenceError
        After ``cfg.max_iter`` iterations, carrying the last residual.
    ParameterDomainError
        If the demand block yields a nonpositive quantity along the way.
    """
    cfg = cfg or SolverConfig()
    system = _DemandSystem(net, sp, cp)
    lnp = system.initial_lnp()
    residual = math.inf
    previous = math.inf
    # cfg.damping caps the working damping; it shrinks when a sweep makes the
    # residual worse (cross-edge coupling the per-edge scale cannot see) and
    # recovers geometrically while sweeps keep contracting.
    working = cfg.damping
    for iteration in range(1, cfg.max_iter + 1):
        if cfg.sweep == "jacobi":
            ev = system.evaluate(lnp)
            gap = system.target_lnp(ev) - lnp
            residual = float(np.max(np.abs(gap)))
            step = np.clip(working * system.step_scale(ev) * gap, -0.5, 0.5)
            lnp = lnp + step
        else:
            residual = 0.0
            for pos in range(lnp.size):
                ev = system.evaluate(lnp)
                gap = system.target_lnp_at(ev, pos) - float(lnp[pos])
                residual = max(residual, abs(gap))
                step = working * system.step_scale_at(ev, pos) * gap
                lnp[pos] += min(max(step, -0.5), 0.5)
        if residual <= cfg.tol:
            return system.state_from(lnp, iteration, residual)
        if residual > previous:
            working = max(0.5 * working, 0.004 * cfg.damping)
        else:
            working = min(cfg.damping, 1.1 * working)
        previous = residual
    raise ConvergenceError(
        f"no fixed point after {cfg.max_iter} iterations (residual {residual:.3e})",
        residual=residual,
        iterations=cfg.max_iter,
    )


def _solve_single_edge(
    system: _DemandSystem,
    state: EquilibriumState,
    pos: int,
    ln_tariff: float,
) -> float:
    """Re-solve one edge's log price holding every other price in the network fixed."""
    cp, sp = system.cp, system.sp
    j = system.e_imp[pos]
    i = system.e_exp[pos]
    lnp_all = np.log(state.price)
    w_all = system.taste_rho * state.price ** (1.0 - cp.rho)
    own_imp = system.e_imp == j
    bundle_rest = float(np.sum(w_all[own_imp]) - w_all[pos])
    own_exp = system.e_exp == i
    q_rest = float(np.sum(state.quantity[own_exp]) - state.quantity[pos])
    taste_rho = system.taste_rho[pos]
    prod, demand_scaled = system.prod[j], system.demand_scaled[j]
    dom = system.dom_factor[j]
    k_i = system.k[i]

    def gap(lnp: float) -> float:
        p = math.exp(lnp)
        w = taste_rho * p ** (1.0 - cp.rho)
        bundle = bundle_rest + w
        pf = bundle ** (1.0 / (1.0 - cp.rho))
        kappa = (pf / cp.gamma) ** cp.gamma * dom
        m0 = (kappa / prod) ** (1.0 / cp.varrho)
        q_imp = (demand_scaled * m0 ** (-cp.nu)) ** system.output_bend
        mc_imp = m0 * q_imp ** ((1.0 - cp.varrho) / cp.varrho)
        qf = cp.gamma * mc_imp * q_imp / pf
        q_edge = qf * taste_rho * (p / pf) ** (-cp.rho)
        q_i = q_rest + q_edge
        c_i = k_i * q_i**system.cost_curvature
        shares = BilateralShares(min(w / bundle, 1.0), min(q_edge / q_i, 1.0))
        mu = bilateral_markup(shares, sp, cp).mu
        return math.log(mu) + math.log(c_i) + ln_tariff - lnp

    center = lnp_all[pos]
    lo, hi = center - 0.05, center + 0.05
    f_lo, f_hi = gap(lo), gap(hi)
    width = 0.05
    while f_lo * f_hi > 0.0 and width < 40.0:
        width *= 2.0
        lo, hi = center - width, center + width
        f_lo, f_hi = gap(lo), gap(hi)
    if f_lo * f_hi > 0.0:
        raise ConvergenceError(
            "could not bracket the single-edge price update", residual=min(abs(f_lo), abs(f_hi))
        )
    return float(brentq(gap, lo, hi, xtol=1e-14, rtol=8.9e-16))


def direct_passthrough_fd(
    state: EquilibriumState,
    edge,
    sp: StructuralParams,
    cp: CalibratedParams,
    dlnT: float = 1e-6,
    cfg: SolverConfig | None = None,
) -> float:
    """Finite-difference pass-through dln(price)/dln(tariff) for one pair.

    Re-solves the focal edge's price at the base and shocked tariff while all
    other prices stay fixed; the pair's own shares respond through the demand
    system. This is the empirical counterpart of the closed-form pass-through
    at the edge's converged shares.
    """
    if dlnT == 0.0:
        raise ParameterDomainError("dlnT = 0 leaves no finite-difference step")
    pos = state.edge_position(edge)
    system = _DemandSystem(state.network, sp, cp)
    base = system.ln_tariff[pos]
    lnp0 = _solve_single_edge(system, state, pos, base)
    lnp1 = _solve_single_edge(system, state, pos, base + dlnT)
    return (lnp1 - lnp0) / dlnT


def full_passthrough_system(
    state: EquilibriumState,
    exporter: str,
    sp: StructuralParams,
    cp: CalibratedParams,
) -> dict:
    """Pass-through of an exporter-wide cost shock into each of its prices.

    Solves the linear spillover system across the exporter's edges: each
    direct rate is amplified or damped by the quantity responses on the
    exporter's other relationships, which move its output and hence both the
    buyer shares and (under decreasing returns) its marginal cost. Rival
    suppliers' first-order markup adjustments enter through the supplier-share
    channel. Returns ``{importer_id: psi}`` in network edge order.
    """
    net = state.network
    exp_pos = net.exporter_index()
    if exporter not in exp_pos:
        raise KeyError(f"no exporter {exporter!r} in the network")
    i = exp_pos[exporter]
    imp_pos = net.importer_index()
    e_exp = np.array([exp_pos[e.exporter_id] for e in net.edges])
    e_imp = np.array([imp_pos[e.importer_id] for e in net.edges])

    all_shares = BilateralShares(state.supplier_share, state.buyer_share)
    slope_s_all, _ = markup_share_slopes(all_shares, sp, cp)
    slope_s_all = np.atleast_1d(slope_s_all)

    own = np.flatnonzero(e_exp == i)
    s_own = state.supplier_share[own]
    x_own = state.buyer_share[own]
    shares_own = BilateralShares(s_own, x_own)
    eps_own = np.atleast_1d(residual_demand_elasticity(s_own, cp))
    _, slope_x_own = markup_share_slopes(shares_own, sp, cp)
    slope_x_own = np.atleast_1d(slope_x_own)
    slope_s_1ms = np.atleast_1d(_markup_slope_s_times_1ms(shares_own, sp, cp))

    curvature = (1.0 - sp.theta) / sp.theta
    n = own.size
    own_s_term = np.empty(n)
    for a, pos in enumerate(own):
        j = e_imp[pos]
        rivals = np.flatnonzero((e_imp == j) & (e_exp != i))
        rival_sum = float(np.sum(state.supplier_share[rivals] * slope_s_all[rivals]))
        term = (cp.rho - 1.0) * slope_s_1ms[a]
        if rival_sum != 0.0:
            # s < 1 whenever rivals exist, so the raw slope is finite here.
            term -= (cp.rho - 1.0) ** 2 * s_own[a] * rival_sum * slope_s_all[pos]
        own_s_term[a] = term

    denom = 1.0 + own_s_term + slope_x_own * eps_own * (1.0 - x_own) + curvature * eps_own * x_own
    phi_tilde = 1.0 / denom
    feedback = phi_tilde * (slope_x_own - curvature)
    matrix = np.eye(n) - feedback[:, None] * (x_own * eps_own)[None, :]
    np.fill_diagonal(matrix, 1.0)
    try:
        psi = np.linalg.solve(matrix, phi_tilde)
    except np.linalg.LinAlgError as err:
        raise SingularSystemError(f"spillover system is singular: {err}") from err
    return {net.edges[pos].importer_id: float(psi[a]) for a, pos in enumerate(own)}


def network_to_json(
    net: TradeNetwork,
    sp: StructuralParams | None = None,
    cp: CalibratedParams | None = None,
) -> dict:
    """Plain-dict form of the network, optionally embedding parameter blocks."""
    obj: dict = {
        "exporters": [
            {"id": e.exporter_id, "cost_shifter": e.cost_shifter} for e in net.exporters
        ],
        "importers": [
            {
                "id": m.importer_id,
                "productivity": m.productivity,
                "demand_shifter": m.demand_shifter,
                "domestic_price": m.domestic_price,
            }
            for m in net.importers
        ],
        "edges": [
            {
                "exporter": e.exporter_id,
                "importer": e.importer_id,
                "taste": e.taste,
                "tariff": e.tariff,
            }
            for e in net.edges
        ],
    }
    if sp is not None:
        obj["bargaining"] = {"phi": sp.phi, "theta": sp.theta}
    if cp is not None:
        obj["calibration"] = {
            "nu": cp.nu,
            "gamma": cp.gamma,
            "rho": cp.rho,
            "varrho": cp.varrho,
            "eta": cp.eta,
        }
    return obj


def network_from_json(obj: Mapping) -> tuple:
    """Parse a network dict; returns ``(net, bargaining or None, calibration or None)``."""
    try:
        exporters = [
            Exporter(exporter_id=rec["id"], cost_shifter=float(rec.get("cost_shifter", 1.0)))
            for rec in obj["exporters"]
        ]
        importers = [
            Importer(
                importer_id=rec["id"],
                productivity=float(rec.get("productivity", 1.0)),
                demand_shifter=float(rec.get("demand_shifter", 1.0)),
                domestic_price=float(rec.get("domestic_price", 1.0)),
            )
            for rec in obj["importers"]
        ]
        edges = [
            Edge(
                exporter_id=rec["exporter"],
                importer_id=rec["importer"],
                taste=float(rec.get("taste", 1.0)),
                tariff=float(rec.get("tariff", 1.0)),
            )
            for rec in obj["edges"]
        ]
    except (KeyError, TypeError) as err:
        raise DataSchemaError(f"malformed network JSON: missing {err}") from err
    net = TradeNetwork(tuple(exporters), tuple(importers), tuple(edges))
    sp = None
    if "bargaining" in obj:
        rec = obj["bargaining"]
        try:
            sp = StructuralParams(phi=float(rec["phi"]), theta=float(rec["theta"]))
        except (KeyError, TypeError) as err:
            raise DataSchemaError(f"malformed bargaining block: missing {err}") from err
    cp = None
    if "calibration" in obj:
        rec = obj["calibration"]
        try:
            cp = CalibratedParams(
                nu=float(rec["nu"]),
                gamma=float(rec["gamma"]),
                rho=float(rec["rho"]),
                varrho=float(rec.get("varrho", 1.0)),
                eta=float(rec["eta"]) if "eta" in rec else float("nan"),
            )
        except (KeyError, TypeError) as err:
            raise DataSchemaError(f"malformed calibration block: missing {err}") from err
    return net, sp, cp


def save_network(
    path,
    net: TradeNetwork,
    sp: StructuralParams | None = None,
    cp: CalibratedParams | None = None,
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(network_to_json(net, sp, cp), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_network(path) -> tuple:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as err:
            raise DataSchemaError(f"invalid network JSON in {path}: {err}") from err
    return network_from_json(obj)
