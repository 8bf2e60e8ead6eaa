"""Model-vs-data validation: predicted changes, IV fit test, aggregate split.

``predicted_changes`` maps tariff shocks through the bilateral
pass-through rate into price, quantity, and sales changes per match.
``iv_fit_test`` runs the goodness-of-fit 2SLS of observed on predicted
changes with the statutory tariff as instrument; the null of a correct
model is a unit coefficient.  ``aggregate_decomposition`` splits
value-weighted aggregate pass-through into markup-only and cost-only
channels and attributes the cross-sectional variance of the combined
elasticity to the two channels.
"""

from __future__ import annotations

from collections.abc import Mapping

import numpy as np
import pandas as pd

from .errors import DataSchemaError
from .panel import SharePanel
from .pricing import BilateralShares, CalibratedParams, StructuralParams, passthrough
from .regression import FitResult, RegressionSpec, tsls

__all__ = [
    "match_changes",
    "predicted_changes",
    "iv_fit_test",
    "aggregate_decomposition",
]

KEY_COLUMNS = ("importer", "exporter", "product", "year", "country")
MATCH_KEYS = ["importer", "exporter", "product"]


def _panel_frame(panel) -> pd.DataFrame:
    frame = panel.frame if isinstance(panel, SharePanel) else panel
    if not isinstance(frame, pd.DataFrame):
        raise DataSchemaError("panel must be a SharePanel or DataFrame")
    for col in ("s", "x"):
        if col not in frame.columns:
            raise DataSchemaError(f"panel missing share column {col!r}")
    return frame


def _tariff_change(frame: pd.DataFrame, tariffs) -> np.ndarray:
    if isinstance(tariffs, str):
        if tariffs not in frame.columns:
            raise DataSchemaError(f"tariff column {tariffs!r} missing from panel")
        values = frame[tariffs].to_numpy(dtype=np.float64)
    else:
        values = np.asarray(tariffs, dtype=np.float64)
        if values.shape != (len(frame),):
            raise DataSchemaError(
                f"tariff changes have shape {values.shape}, panel has {len(frame)} rows"
            )
    if not np.all(np.isfinite(values)):
        raise DataSchemaError("tariff changes contain non-finite values")
    return values


def match_changes(panel, base_year=None, event_year=None) -> pd.DataFrame:
    """Year-over-year observed changes per surviving match.

    Joins each match's rows in two consecutive panel years and returns
    base-year shares and weights next to the observed log changes.  The
    headline ``dlnp_obs`` is duty-inclusive (producer price plus the
    statutory tariff wedge); the producer-price change is kept as
    ``dlnp_obs_exclusive``.  Defaults to the last two years in the panel.
    """
    frame = _panel_frame(panel)
    for col in ("price", "tariff", "year"):
        if col not in frame.columns:
            raise DataSchemaError(f"panel missing column {col!r} for match changes")
    years = np.sort(frame["year"].unique())
    if event_year is None:
        event_year = int(years[-1])
    if base_year is None:
        earlier = years[years < event_year]
        if earlier.size == 0:
            raise DataSchemaError(f"no panel year precedes event year {event_year}")
        base_year = int(earlier[-1])
    if base_year not in years or event_year not in years:
        raise DataSchemaError(
            f"panel lacks year {base_year} or {event_year}; has {list(years)}"
        )

    carry = [c for c in ("country", "s", "x", "alpha", "value") if c in frame.columns]
    base = frame.loc[frame["year"] == base_year, MATCH_KEYS + carry + ["price", "tariff"]]
    event = frame.loc[frame["year"] == event_year, MATCH_KEYS + ["price", "tariff"]]
    merged = base.merge(event, on=MATCH_KEYS, suffixes=("", "_event"))
    if merged.empty:
        raise DataSchemaError(
            f"no match appears in both year {base_year} and year {event_year}"
        )

    dlnp = np.log(merged["price_event"].to_numpy()) - np.log(merged["price"].to_numpy())
    d_tariff = np.log1p(merged["tariff_event"].to_numpy()) - np.log1p(
        merged["tariff"].to_numpy()
    )
    out = merged[MATCH_KEYS + carry].copy()
    out["base_year"] = base_year
    out["event_year"] = event_year
    out["tariff_change"] = d_tariff
    out["dlnp_obs_exclusive"] = dlnp
    out["dlnp_obs"] = dlnp + d_tariff
    return out


def predicted_changes(
    panel,
    sp: StructuralParams,
    cp: CalibratedParams,
    tariffs,
) -> pd.DataFrame:
    """Per-match predicted log changes for a tariff shock.

    ``tariffs`` is the log gross-tariff change per row, either a column
    name in the panel or an aligned vector.  The duty-inclusive price
    change is the pass-through rate times the shock; quantities respond
    with the match-specific residual demand elasticity and sales follow
    from the price-quantity identity, so a price increase lowers sales
    whenever demand is elastic.  Channel-only price changes (markup
    channel alone, cost channel alone) come along for decompositions.
    """
    frame = _panel_frame(panel)
    d_tariff = _tariff_change(frame, tariffs)
    shares = BilateralShares(
        s=frame["s"].to_numpy(dtype=np.float64),
        x=frame["x"].to_numpy(dtype=np.float64),
    )
    dec = passthrough(shares, sp, cp)
    phi = np.asarray(dec.passthrough, dtype=np.float64)
    eps = np.asarray(dec.epsilon, dtype=np.float64)
    dlnp = phi * d_tariff

    out = frame[[c for c in KEY_COLUMNS if c in frame.columns]].copy()
    out["s"] = shares.s
    out["x"] = shares.x
    out["tariff_change"] = d_tariff
    out["passthrough"] = phi
    out["epsilon"] = eps
    out["markup_elasticity"] = np.asarray(dec.markup_elasticity, dtype=np.float64)
    out["cost_elasticity"] = np.asarray(dec.cost_elasticity, dtype=np.float64)
    out["dlnp_hat"] = dlnp
    out["dlnq_hat"] = -eps * dlnp
    out["dlnr_hat"] = (1.0 - eps) * dlnp
    out["dlnp_hat_markup_only"] = (
        np.asarray(dec.passthrough_markup_only, dtype=np.float64) * d_tariff
    )
    out["dlnp_hat_cost_only"] = (
        np.asarray(dec.passthrough_cost_only, dtype=np.float64) * d_tariff
    )
    return out


def _label_columns(labels, prefix: str) -> dict:
    if isinstance(labels, Mapping):
        return {str(name): np.asarray(values) for name, values in labels.items()}
    return {f"{prefix}{i}": np.asarray(values) for i, values in enumerate(labels)}


def iv_fit_test(
    observed,
    predicted,
    tariff,
    fe_dims=(),
    clusters=(),
) -> FitResult:
    """2SLS of observed changes on predicted, instrumented by the tariff.

    Under a correctly specified model the coefficient on the predicted
    change is 1.  ``fe_dims`` and ``clusters`` are group-label vectors
    (a mapping name -> labels, or a plain sequence of label vectors).
    A weak instrument is reported through ``diagnostics``, not raised.
    """
    observed = np.asarray(observed, dtype=np.float64)
    predicted = np.asarray(predicted, dtype=np.float64)
    tariff = np.asarray(tariff, dtype=np.float64)
    n = observed.shape[0]
    if predicted.shape != (n,) or tariff.shape != (n,):
        raise DataSchemaError("observed, predicted, and tariff must be aligned vectors")
    if not np.any(tariff != 0.0):
        raise DataSchemaError("tariff instrument has no variation")

    columns = {"observed": observed, "predicted": predicted, "tariff": tariff}
    fe_cols = _label_columns(fe_dims, "fe")
    cluster_cols = _label_columns(clusters, "cluster")
    for name, values in {**fe_cols, **cluster_cols}.items():
        if values.shape[0] != n:
            raise DataSchemaError(f"label vector {name!r} is not aligned with the data")
        columns[name] = values
    frame = pd.DataFrame(columns)

    spec = RegressionSpec(
        dependent="observed",
        regressors=("predicted",),
        instruments=("tariff",),
        fe_dims=tuple(fe_cols),
        cluster_dims=tuple(cluster_cols),
    )
    fit = tsls(spec, frame)
    se = fit.se_of("predicted")
    fit.diagnostics["beta_minus_one_t"] = (
        (fit["predicted"] - 1.0) / se if se > 0.0 else float("inf")
    )
    return fit


def _weighted_slope(y: np.ndarray, d_tariff: np.ndarray, weights: np.ndarray) -> float:
    """Slope of a weighted regression of y on the tariff change with intercept."""
    x = np.column_stack([np.ones_like(d_tariff), d_tariff])
    xtwx = x.T @ (x * weights[:, None])
    try:
        solution = np.linalg.solve(xtwx, x.T @ (weights * y))
    except np.linalg.LinAlgError as exc:
        raise DataSchemaError("tariff change has no weighted variation") from exc
    return float(solution[1])


def aggregate_decomposition(
    panel,
    sp: StructuralParams,
    cp: CalibratedParams,
    tariffs,
) -> dict:
    """Aggregate pass-through split into markup and cost channels.

    Each aggregate rate is 1 plus the coefficient from a value-weighted
    regression of the duty-exclusive predicted change (full model,
    markup channel only, cost channel only) on the tariff change, using
    initial-period import values from the panel's ``value`` column as
    weights.  The variance decomposition attributes the cross-sectional
    variance of the combined markup-plus-cost elasticity to the two
    channels through covariance shares, which sum to 1 by construction.
    """
    frame = _panel_frame(panel)
    if "value" not in frame.columns:
        raise DataSchemaError("panel missing 'value' column for aggregation weights")
    weights = frame["value"].to_numpy(dtype=np.float64)
    if np.any(weights < 0.0) or not np.all(np.isfinite(weights)):
        raise DataSchemaError("aggregation weights must be finite and non-negative")

    changes = predicted_changes(panel, sp, cp, tariffs)
    d_tariff = changes["tariff_change"].to_numpy()
    treated = d_tariff != 0.0
    if not treated.any() or weights[treated].sum() <= 0.0:
        raise DataSchemaError("zero treated weight: no tariff variation carries weight")

    coefficients = {}
    for label, column in (
        ("full", "dlnp_hat"),
        ("markup_only", "dlnp_hat_markup_only"),
        ("cost_only", "dlnp_hat_cost_only"),
    ):
        duty_exclusive = changes[column].to_numpy() - d_tariff
        coefficients[label] = _weighted_slope(duty_exclusive, d_tariff, weights)

    markup = changes["markup_elasticity"].to_numpy()
    cost = changes["cost_elasticity"].to_numpy()
    combined = markup + cost
    spread = combined - combined.mean()
    variance = float(spread @ spread)
    if variance <= 0.0:
        raise DataSchemaError("combined elasticity has no cross-sectional variance")
    share_cost = float((cost - cost.mean()) @ spread) / variance
    share_markup = 1.0 - share_cost

    return {
        "passthrough_full": 1.0 + coefficients["full"],
        "passthrough_markup_only": 1.0 + coefficients["markup_only"],
        "passthrough_cost_only": 1.0 + coefficients["cost_only"],
        "coefficient_full": coefficients["full"],
        "coefficient_markup_only": coefficients["markup_only"],
        "coefficient_cost_only": coefficients["cost_only"],
        "variance_share_cost": share_cost,
        "variance_share_markup": share_markup,
        "n_obs": int(len(changes)),
        "n_treated": int(treated.sum()),
        "treated_weight": float(weights[treated].sum()),
        "total_weight": float(weights.sum()),
    }
