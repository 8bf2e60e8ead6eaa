"""Synthetic transaction panels and Monte Carlo share designs.

Two generators live here.  `generate_montecarlo_blocks` builds the bare
share cross-sections used by the estimator studies: square blocks of
exporters and importers with uniform shares renormalized so both share
systems sum to one inside each block, unit marginal costs, and prices
equal to the bilateral markup.  `generate_panel` builds a multi-year
transaction panel with lognormal cost shifters, Dirichlet quantity
allocations, and country-by-product tariff events in the final year; the
prices it records are internally consistent with the shares recomputed
from the records themselves (a small within-market fixed point).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import ConfigError, ConvergenceError, DataSchemaError
from .pricing import (
    BilateralShares,
    CalibratedParams,
    StructuralParams,
    bilateral_markup,
    passthrough,
)

__all__ = [
    "TRANSACTION_COLUMNS",
    "SHARE_COLUMNS",
    "TransactionRecord",
    "SharePanel",
    "MonteCarloDesign",
    "PanelConfig",
    "FilterPolicy",
    "generate_montecarlo_blocks",
    "generate_panel",
    "compute_shares",
    "apply_filters",
    "aggregate_annual",
    "records_to_frame",
    "frame_to_records",
    "save_transactions",
    "load_transactions",
]

logger = logging.getLogger(__name__)

TRANSACTION_COLUMNS = [
    "importer",
    "exporter",
    "product",
    "country",
    "year",
    "value",
    "quantity",
    "tariff",
]

SHARE_COLUMNS = ["importer", "exporter", "product", "year", "price", "s", "x", "alpha"]


@dataclass(frozen=True)
class TransactionRecord:
    """One shipment from a foreign exporter to a domestic importer.

    ``value`` is duty-exclusive (the producer price times quantity) and
    ``tariff`` is the ad valorem statutory rate, so the buyer-side cost is
    ``value * (1 + tariff)``.
    """

    importer: str
    exporter: str
    product: str
    country: str
    year: int
    value: float
    quantity: float
    tariff: float = 0.0

    def __post_init__(self) -> None:
        for name in ("importer", "exporter", "product", "country"):
            if not getattr(self, name):
                raise DataSchemaError(f"{name} id must be non-empty")
        if not np.isfinite(self.value) or self.value <= 0.0:
            raise DataSchemaError(f"value = {self.value!r} must be a positive real")
        if not np.isfinite(self.quantity) or self.quantity <= 0.0:
            raise DataSchemaError(f"quantity = {self.quantity!r} must be a positive real")
        if not np.isfinite(self.tariff) or self.tariff < 0.0:
            raise DataSchemaError(f"tariff = {self.tariff!r} must be >= 0")

    @property
    def unit_price(self) -> float:
        return self.value / self.quantity


def records_to_frame(records) -> pd.DataFrame:
    """Materialize records (or pass through a frame) with the transaction schema."""
    if isinstance(records, pd.DataFrame):
        missing = [c for c in TRANSACTION_COLUMNS if c not in records.columns]
        if missing:
            raise DataSchemaError(f"transaction frame missing columns {missing}")
        return records.reset_index(drop=True)
    rows = list(records)
    if not rows:
        return pd.DataFrame(columns=TRANSACTION_COLUMNS)
    return pd.DataFrame(
        {
            "importer": [r.importer for r in rows],
            "exporter": [r.exporter for r in rows],
            "product": [r.product for r in rows],
            "country": [r.country for r in rows],
            "year": np.asarray([r.year for r in rows], dtype=np.int64),
            "value": np.asarray([r.value for r in rows], dtype=np.float64),
            "quantity": np.asarray([r.quantity for r in rows], dtype=np.float64),
            "tariff": np.asarray([r.tariff for r in rows], dtype=np.float64),
        }
    )


def frame_to_records(frame: pd.DataFrame) -> list[TransactionRecord]:
    """Validate a frame row by row into TransactionRecord objects."""
    missing = [c for c in TRANSACTION_COLUMNS if c not in frame.columns]
    if missing:
        raise DataSchemaError(f"transaction frame missing columns {missing}")
    return [
        TransactionRecord(
            importer=str(row.importer),
            exporter=str(row.exporter),
            product=str(row.product),
            country=str(row.country),
            year=int(row.year),
            value=float(row.value),
            quantity=float(row.quantity),
            tariff=float(row.tariff),
        )
        for row in frame.itertuples(index=False)
    ]


def save_transactions(records, path) -> None:
    """Write transactions as CSV with the pinned column order."""
    frame = records_to_frame(records)
    frame[TRANSACTION_COLUMNS].to_csv(path, index=False)


def load_transactions(path) -> list[TransactionRecord]:
    """Read a transaction CSV back into validated records."""
    try:
        frame = pd.read_csv(path, dtype={"importer": str, "exporter": str, "product": str, "country": str})
    except (OSError, ValueError, pd.errors.ParserError) as exc:
        raise DataSchemaError(f"cannot read transaction CSV {path}: {exc}") from exc
    try:
        return frame_to_records(frame)
    except (AttributeError, TypeError, ValueError) as exc:
        raise DataSchemaError(f"malformed transaction CSV {path}: {exc}") from exc


@dataclass
class SharePanel:
    """Bilateral share panel keyed by (importer, exporter, product, year).

    ``frame`` holds at least the pinned columns: the unit price, the
    supplier share ``s`` (value share of the exporter within the
    importer-product-year), the buyer share ``x`` (quantity share of the
    importer within the exporter-product-year), and the cost-share weight
    ``alpha`` of the product within the importer-year.  Extra columns
    (country, tariff, value, quantity) are carried along when available
    but are not part of the CSV contract.
    """

    frame: pd.DataFrame
    excluded_cells: int = 0

    def __post_init__(self) -> None:
        missing = [c for c in SHARE_COLUMNS if c not in self.frame.columns]
        if missing:
            raise DataSchemaError(f"share panel missing columns {missing}")

    def __len__(self) -> int:
        return len(self.frame)

    def validate(self, tol: float = 1e-9) -> None:
        """Check the three share normalizations; raises DataSchemaError."""
        f = self.frame
        s_sum = f.groupby(["importer", "product", "year"], sort=False)["s"].sum()
        if not np.allclose(s_sum.to_numpy(), 1.0, atol=tol, rtol=0.0):
            raise DataSchemaError("supplier shares do not sum to 1 within importer-product-year")
        x_sum = f.groupby(["exporter", "product", "year"], sort=False)["x"].sum()
        if not np.allclose(x_sum.to_numpy(), 1.0, atol=tol, rtol=0.0):
            raise DataSchemaError("buyer shares do not sum to 1 within exporter-product-year")
        a = f.drop_duplicates(["importer", "product", "year"])
        a_sum = a.groupby(["importer", "year"], sort=False)["alpha"].sum()
        if not np.allclose(a_sum.to_numpy(), 1.0, atol=tol, rtol=0.0):
            raise DataSchemaError("cost-share weights do not sum to 1 within importer-year")

    def to_csv(self, path) -> None:
        self.frame[SHARE_COLUMNS].to_csv(path, index=False)

    @classmethod
    def from_csv(cls, path) -> "SharePanel":
        try:
            frame = pd.read_csv(path, dtype={"importer": str, "exporter": str, "product": str})
        except (OSError, ValueError, pd.errors.ParserError) as exc:
            raise DataSchemaError(f"cannot read share panel CSV {path}: {exc}") from exc
        return cls(frame=frame)


@dataclass(frozen=True)
class MonteCarloDesign:
    """Square-block share design: each block has ``importers_per_exporter``
    exporters and as many importers, fully connected, with uniform shares
    renormalized inside the block.  Marginal costs are 1, so log prices
    equal log markups exactly.

    ``share_law`` picks how the two share matrices relate.  With
    "uniform" the cost-share and sales-share matrices come from two
    independent uniform draws, so a pair's position in the buyer's cost
    split carries no information about its position in the seller's
    sales split.  With "uniform-common" a single uniform matrix is
    normalized down columns for cost shares and across rows for sales
    shares, the way both shares would derive from one matrix of
    transaction values; large pairs are then large on both margins,
    which is the configuration that makes the restricted estimator's
    upward bias hold replica by replica rather than only on average.
    """

    n_exporters: int = 200
    importers_per_exporter: int = 2
    n_replicas: int = 501
    truth: StructuralParams = field(default_factory=lambda: StructuralParams(phi=0.827, theta=0.454))
    calibration: CalibratedParams = field(
        default_factory=lambda: CalibratedParams(nu=4.0, gamma=0.5, rho=10.0, varrho=1.0)
    )
    share_law: str = "uniform"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.importers_per_exporter < 2:
            raise ConfigError(
                "importers_per_exporter must be >= 2: a single buyer leaves no "
                "within-exporter price contrast to identify the bargaining weight"
            )
        if self.n_exporters < self.importers_per_exporter:
            raise ConfigError("n_exporters must be at least one full block")
        if self.n_exporters % self.importers_per_exporter != 0:
            raise ConfigError(
                f"n_exporters = {self.n_exporters} must split into square blocks "
                f"of {self.importers_per_exporter}"
            )
        if self.n_replicas < 1:
            raise ConfigError("n_replicas must be >= 1")
        if self.share_law not in ("uniform", "uniform-common"):
            raise ConfigError(
                f"unknown share law {self.share_law!r}; "
                "expected 'uniform' or 'uniform-common'"
            )


def _replica_share_panel(design: MonteCarloDesign, rng: np.random.Generator) -> SharePanel:
    m = design.importers_per_exporter
    n_blocks = design.n_exporters // m
    # axis 1 indexes exporters inside the block, axis 2 importers
    if design.share_law == "uniform-common":
        u = rng.uniform(size=(n_blocks, m, m))
        s = u / u.sum(axis=1, keepdims=True)
        x = u / u.sum(axis=2, keepdims=True)
    else:
        s = rng.uniform(size=(n_blocks, m, m))
        s /= s.sum(axis=1, keepdims=True)
        x = rng.uniform(size=(n_blocks, m, m))
        x /= x.sum(axis=2, keepdims=True)
    mu = bilateral_markup(
        BilateralShares(s=s.ravel(), x=x.ravel()), design.truth, design.calibration
    ).mu
    block = np.repeat(np.arange(n_blocks), m * m)
    row = np.tile(np.repeat(np.arange(m), m), n_blocks)
    col = np.tile(np.arange(m), n_blocks * m)
    exporter_ids = block * m + row
    importer_ids = block * m + col
    frame = pd.DataFrame(
        {
            "importer": np.char.add("m", importer_ids.astype(str)),
            "exporter": np.char.add("e", exporter_ids.astype(str)),
            "product": "h0",
            "year": 0,
            "price": np.asarray(mu, dtype=np.float64),
            "s": s.ravel(),
            "x": x.ravel(),
            "alpha": 1.0,
        }
    )
    return SharePanel(frame=frame)


def generate_montecarlo_blocks(design: MonteCarloDesign) -> list[SharePanel]:
    """One SharePanel per replica, each from an independent seeded stream."""
    children = np.random.SeedSequence(design.seed).spawn(design.n_replicas)
    return [_replica_share_panel(design, np.random.default_rng(child)) for child in children]


@dataclass(frozen=True)
class PanelConfig:
    """Layout and distributional knobs for the rich transaction generator.

    Every product market is a complete bipartite block of
    ``exporters_per_product`` sellers and ``importers_per_product`` buyers;
    importers are shared across products through a rotating window over a
    pool of ``importer_pool`` ids, so buyer-level weights across products
    are non-degenerate.  Quantities come from importer-size-scaled
    Dirichlet(1, ..., 1) allocations; log marginal costs combine a fixed
    exporter-product component with match-year noise of standard
    deviation ``sigma_cost``.  In the final year a Bernoulli draw per
    (country, product) cell triggers an ad valorem tariff uniform on
    [tariff_low, tariff_high]; treated prices and quantities respond with
    the bilateral pass-through rate evaluated at pre-event shares.
    """

    n_products: int = 20
    exporters_per_product: int = 3
    importers_per_product: int = 4
    importer_pool: int | None = None
    n_years: int = 3
    first_year: int = 2015
    n_countries: int = 5
    sigma_cost: float = 0.1
    base_cost_sigma: float = 0.25
    importer_size_sigma: float = 0.5
    tariff_treat_prob: float = 0.3
    tariff_low: float = 0.10
    tariff_high: float = 0.40
    bargaining: StructuralParams = field(default_factory=lambda: StructuralParams(phi=0.827, theta=0.454))
    calibration: CalibratedParams = field(
        default_factory=lambda: CalibratedParams(nu=4.0, gamma=0.5, rho=10.0, varrho=1.0)
    )
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_products < 1:
            raise ConfigError("n_products must be >= 1")
        if self.exporters_per_product < 2:
            raise ConfigError("exporters_per_product must be >= 2 for non-degenerate supplier shares")
        if self.importers_per_product < 2:
            raise ConfigError("importers_per_product must be >= 2 for non-degenerate buyer shares")
        pool = self.importer_pool if self.importer_pool is not None else self.importers_per_product
        if pool < self.importers_per_product:
            raise ConfigError("importer_pool cannot be smaller than importers_per_product")
        if self.n_years < 2:
            raise ConfigError("n_years must be >= 2 to define price changes")
        if self.n_countries < 1:
            raise ConfigError("n_countries must be >= 1")
        for name in ("sigma_cost", "base_cost_sigma", "importer_size_sigma"):
            if getattr(self, name) < 0.0:
                raise ConfigError(f"{name} must be >= 0")
        if not 0.0 <= self.tariff_treat_prob <= 1.0:
            raise ConfigError("tariff_treat_prob must lie in [0, 1]")
        if not 0.0 <= self.tariff_low <= self.tariff_high:
            raise ConfigError("need 0 <= tariff_low <= tariff_high")

    @property
    def pool_size(self) -> int:
        return self.importer_pool if self.importer_pool is not None else self.importers_per_product


def _value_share_fixed_point(
    q: np.ndarray,
    x: np.ndarray,
    base_cost: np.ndarray,
    jh_codes: np.ndarray,
    n_jh: int,
    sp: StructuralParams,
    cp: CalibratedParams,
) -> tuple[np.ndarray, np.ndarray]:
    """Solve s = normalize(p(s) * q) within importer-product cells.

    Returns (price, s) such that price = mu(s, x) * base_cost and s is the
    value share recomputed from those very prices, so share construction on
    the emitted records reproduces the inputs of the markup formula.
    """
    denom_q = np.bincount(jh_codes, weights=q, minlength=n_jh)
    s = q / denom_q[jh_codes]
    for _ in range(200):
        mu = np.asarray(bilateral_markup(BilateralShares(s=s, x=x), sp, cp).mu)
        price = mu * base_cost
        value = price * q
        denom_v = np.bincount(jh_codes, weights=value, minlength=n_jh)
        s_new = value / denom_v[jh_codes]
        gap = float(np.max(np.abs(s_new - s)))
        s = s_new
        if gap < 1e-14:
            return price, s
    raise ConvergenceError(
        "value-share fixed point did not converge; markup curvature in s is "
        "too strong for these parameters",
        residual=gap,
    )


def generate_panel(config: PanelConfig) -> list[TransactionRecord]:
    """Multi-year transaction panel consistent with the bilateral pricing rule.

    Non-final years satisfy ln p = ln mu(s, x) + ln k + dk exactly, where
    (s, x) are the shares that `compute_shares` recovers from the emitted
    records and dk is the match-year cost noise.  Final-year treated cells
    move off that baseline by the linearized tariff response: the producer
    price scales by (1 + tau)^(Phi - 1) and the quantity by
    (1 + tau)^(-eps * Phi), so the duty-inclusive price change equals
    Phi * ln(1 + tau) exactly when sigma_cost = 0.
    """
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    P, E, M = config.n_products, config.exporters_per_product, config.importers_per_product
    pool = config.pool_size

    p_idx = np.repeat(np.arange(P), E * M)
    e_idx = np.tile(np.repeat(np.arange(E), M), P)
    m_slot = np.tile(np.arange(M), P * E)
    m_idx = (p_idx + m_slot) % pool
    n_edges = P * E * M

    country_of = (p_idx * E + e_idx) % config.n_countries
    exporter_code = p_idx * E + e_idx
    importer_code = m_idx

    # cell codes for group sums
    jh_codes = p_idx * pool + m_idx
    n_jh = P * pool
    ih_codes = exporter_code
    n_ih = P * E

    ln_k_base = rng.normal(0.0, config.base_cost_sigma, size=n_ih)
    importer_size = np.exp(rng.normal(0.0, config.importer_size_sigma, size=pool))
    alloc = rng.exponential(1.0, size=n_edges)
    alloc_sum = np.bincount(jh_codes, weights=alloc, minlength=n_jh)
    q0 = importer_size[m_idx] * alloc / alloc_sum[jh_codes]

    denom_q = np.bincount(ih_codes, weights=q0, minlength=n_ih)
    x = q0 / denom_q[ih_codes]

    treated = rng.uniform(size=(config.n_countries, P)) < config.tariff_treat_prob
    tau_event = rng.uniform(config.tariff_low, config.tariff_high, size=(config.n_countries, P))
    tau_edge = np.where(treated[country_of, p_idx], tau_event[country_of, p_idx], 0.0)

    sp, cp = config.bargaining, config.calibration
    importer_names = np.char.add("m", np.arange(pool).astype(str))
    exporter_names = np.char.add(
        "e", np.char.add(p_idx.astype(str), np.char.add("_", e_idx.astype(str)))
    )
    product_names = np.char.add("h", p_idx.astype(str))
    country_names = np.char.add("c", country_of.astype(str))

    frames = []
    last_year = config.first_year + config.n_years - 1
    for t in range(config.n_years):
        year = config.first_year + t
        dk = rng.normal(0.0, config.sigma_cost, size=n_edges) if config.sigma_cost > 0 else np.zeros(n_edges)
        base_cost = np.exp(ln_k_base[ih_codes] + dk)
        price, s = _value_share_fixed_point(q0, x, base_cost, jh_codes, n_jh, sp, cp)
        quantity = q0.copy()
        tariff = np.zeros(n_edges)
        if year == last_year and np.any(tau_edge > 0.0):
            hit = tau_edge > 0.0
            dec = passthrough(BilateralShares(s=s[hit], x=x[hit]), sp, cp)
            phi_pt = np.asarray(dec.passthrough)
            eps = np.asarray(dec.epsilon)
            ln_t = np.log1p(tau_edge[hit])
            price = price.copy()
            price[hit] *= np.exp((phi_pt - 1.0) * ln_t)
            quantity[hit] *= np.exp(-eps * phi_pt * ln_t)
            tariff = np.where(hit, tau_edge, 0.0)
        frames.append(
            pd.DataFrame(
                {
                    "importer": importer_names[m_idx],
                    "exporter": exporter_names,
                    "product": product_names,
                    "country": country_names,
                    "year": year,
                    "value": price * quantity,
                    "quantity": quantity,
                    "tariff": tariff,
                }
            )
        )
    panel = pd.concat(frames, ignore_index=True)
    return frame_to_records(panel)


def aggregate_annual(records) -> pd.DataFrame:
    """Collapse transactions to one row per (importer, exporter, product, country, year).

    Values and quantities add up; the tariff is value-weighted in case
    sub-annual rows disagree.
    """
    frame = records_to_frame(records)
    if frame.empty:
        return frame
    frame = frame.assign(_wt=frame["value"] * frame["tariff"])
    agg = (
        frame.groupby(["importer", "exporter", "product", "country", "year"], sort=False, as_index=False)
        .agg(value=("value", "sum"), quantity=("quantity", "sum"), _wt=("_wt", "sum"))
    )
    agg["tariff"] = agg["_wt"] / agg["value"]
    return agg.drop(columns="_wt")[TRANSACTION_COLUMNS]


def compute_shares(records) -> SharePanel:
    """Annualize records and construct the three share systems.

    s is the exporter's value share within (importer, product, year);
    x is the importer's quantity share within (exporter, product, year);
    alpha is the product's value share within (importer, year).  Cells
    whose denominator is not strictly positive are excluded and counted in
    ``excluded_cells``.
    """
    agg = aggregate_annual(records)
    if agg.empty:
        empty = pd.DataFrame(columns=SHARE_COLUMNS)
        return SharePanel(frame=empty)
    bad = (
        ~np.isfinite(agg["value"].to_numpy())
        | ~np.isfinite(agg["quantity"].to_numpy())
        | (agg["value"].to_numpy() <= 0.0)
        | (agg["quantity"].to_numpy() <= 0.0)
    )
    excluded = int(bad.sum())
    if excluded:
        logger.warning("compute_shares: excluding %d cells with non-positive value or quantity", excluded)
        agg = agg.loc[~bad].reset_index(drop=True)
    v_jht = agg.groupby(["importer", "product", "year"], sort=False)["value"].transform("sum")
    q_iht = agg.groupby(["exporter", "product", "year"], sort=False)["quantity"].transform("sum")
    v_jt = agg.groupby(["importer", "year"], sort=False)["value"].transform("sum")
    out = agg.assign(
        price=agg["value"] / agg["quantity"],
        s=agg["value"] / v_jht,
        x=agg["quantity"] / q_iht,
        alpha=v_jht / v_jt,
    )
    cols = SHARE_COLUMNS + ["country", "tariff", "value", "quantity"]
    return SharePanel(frame=out[cols], excluded_cells=excluded)


@dataclass(frozen=True)
class FilterPolicy:
    """Sample filters applied to the annualized panel, in order: the
    within-product unit-value percentile band, the log price change cap
    between consecutive years, the consecutive-year presence requirement,
    and the minimum number of distinct buyers per exporter-product-year.
    """

    lower_pct: float = 1.0
    upper_pct: float = 99.0
    max_abs_log_change: float = 4.0
    require_consecutive_years: bool = True
    min_buyers: int = 2

    def __post_init__(self) -> None:
        if not 0.0 <= self.lower_pct < self.upper_pct <= 100.0:
            raise ConfigError("need 0 <= lower_pct < upper_pct <= 100")
        if self.max_abs_log_change <= 0.0:
            raise ConfigError("max_abs_log_change must be positive")
        if self.min_buyers < 1:
            raise ConfigError("min_buyers must be >= 1")


def apply_filters(records, policy: FilterPolicy | None = None, diagnostics: dict | None = None):
    """Annualize and filter records; returns the surviving records.

    When a row's price change from the previous year breaches the cap, the
    later row of the offending change is dropped.  Pass a dict as
    ``diagnostics`` to receive per-stage drop counts.
    """
    policy = policy or FilterPolicy()
    frame = aggregate_annual(records)
    counts: dict[str, int] = {}

    if not frame.empty:
        price = frame["value"].to_numpy() / frame["quantity"].to_numpy()
        frame = frame.assign(_price=price)
        by_product = frame.groupby("product", sort=False)["_price"]
        lo = by_product.transform(lambda c: np.percentile(c, policy.lower_pct))
        hi = by_product.transform(lambda c: np.percentile(c, policy.upper_pct))
        keep = (frame["_price"] >= lo).to_numpy() & (frame["_price"] <= hi).to_numpy()
        counts["unit_value_band"] = int((~keep).sum())
        frame = frame.loc[keep].reset_index(drop=True)

    if not frame.empty:
        frame = frame.sort_values(["exporter", "importer", "product", "year"]).reset_index(drop=True)
        grp = frame.groupby(["exporter", "importer", "product"], sort=False)
        lnp = np.log(frame["_price"].to_numpy())
        prev_price = grp["_price"].shift(1).to_numpy()
        prev_year = grp["year"].shift(1)
        consecutive = ((frame["year"] - prev_year) == 1).to_numpy()
        with np.errstate(invalid="ignore"):
            dlnp = lnp - np.log(prev_price)
            jump = consecutive & (np.abs(dlnp) > policy.max_abs_log_change)
        counts["log_change_cap"] = int(jump.sum())
        frame = frame.loc[~jump].reset_index(drop=True)

    if policy.require_consecutive_years and not frame.empty:
        key = frame[["exporter", "importer", "product", "year"]]
        have = set(map(tuple, key.itertuples(index=False, name=None)))
        years = frame["year"].to_numpy()
        trip = list(zip(frame["exporter"], frame["importer"], frame["product"]))
        keep = np.fromiter(
            (
                (e, i, h, y - 1) in have or (e, i, h, y + 1) in have
                for (e, i, h), y in zip(trip, years)
            ),
            dtype=bool,
            count=len(frame),
        )
        counts["consecutive_years"] = int((~keep).sum())
        frame = frame.loc[keep].reset_index(drop=True)

    if policy.min_buyers > 1 and not frame.empty:
        n_buyers = frame.groupby(["exporter", "product", "year"], sort=False)["importer"].transform("nunique")
        keep = n_buyers.to_numpy() >= policy.min_buyers
        counts["min_buyers"] = int((~keep).sum())
        frame = frame.loc[keep].reset_index(drop=True)

    if diagnostics is not None:
        diagnostics.update(counts)
    for stage, n in counts.items():
        if n:
            logger.debug("apply_filters: stage %s dropped %d rows", stage, n)
    if not frame.empty:
        frame = frame.drop(columns="_price", errors="ignore")
    return frame_to_records(frame[TRANSACTION_COLUMNS] if not frame.empty else frame)
