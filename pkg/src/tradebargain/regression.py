"""Fixed-effect OLS and 2SLS with cluster-robust covariance.

Multi-way fixed effects are absorbed by alternating projections rather
than dummy expansion, so designs with thousands of levels stay cheap.
Covariance supports one- and two-way clustering (two-way by
inclusion-exclusion with eigenvalue truncation) and defaults to a
heteroskedasticity-robust estimate.  2SLS reports per-endogenous
first-stage and conditional F statistics.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import ConfigError, ConvergenceError, DataSchemaError, SingularSystemError

__all__ = [
    "RegressionSpec",
    "FitResult",
    "within_transform",
    "ols",
    "tsls",
]

logger = logging.getLogger(__name__)

WITHIN_TOL = 1e-10
WEAK_INSTRUMENT_F = 10.0


@dataclass(frozen=True)
class RegressionSpec:
    """Column-name description of one regression design.

    ``regressors`` may include interaction columns prepared by the caller.
    For 2SLS, ``instruments`` is the complete instrument list: exogenous
    regressors appear in both lists and instrument themselves, while
    regressors absent from ``instruments`` are treated as endogenous.
    """

    dependent: str
    regressors: tuple
    fe_dims: tuple = ()
    cluster_dims: tuple = ()
    weight: str | None = None
    instruments: tuple = ()

    def __post_init__(self) -> None:
        if not self.dependent:
            raise ConfigError("dependent variable name is required")
        if not self.regressors:
            raise ConfigError("at least one regressor is required")
        if len(set(self.regressors)) != len(self.regressors):
            raise ConfigError("duplicate regressor names")
        if len(set(self.instruments)) != len(self.instruments):
            raise ConfigError("duplicate instrument names")
        if len(self.cluster_dims) > 2:
            raise ConfigError("clustering supports one or two dimensions")
        if self.instruments:
            endogenous = self.endogenous
            excluded = [z for z in self.instruments if z not in self.regressors]
            if len(excluded) < len(endogenous):
                raise ConfigError(
                    f"{len(excluded)} excluded instruments cannot identify "
                    f"{len(endogenous)} endogenous regressors"
                )

    @property
    def endogenous(self) -> tuple:
        return tuple(x for x in self.regressors if x not in self.instruments)


@dataclass
class FitResult:
    """Coefficients with cluster-robust covariance and fit diagnostics.

    ``first_stage_f`` and ``conditional_f`` map each endogenous regressor
    to its excluded-instrument F statistic; both are None for OLS.
    """

    names: tuple
    coef: np.ndarray
    cov: np.ndarray
    r_squared: float
    n_obs: int
    first_stage_f: dict | None = None
    conditional_f: dict | None = None
    n_singletons_dropped: int = 0
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.cov = 0.5 * (self.cov + self.cov.T)
        eigenvalues = np.linalg.eigvalsh(self.cov)
        if eigenvalues.size and eigenvalues.min() < -1e-8 * max(1.0, eigenvalues.max()):
            raise DataSchemaError("covariance is not positive semidefinite")

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))

    def __getitem__(self, name: str) -> float:
        return float(self.coef[self.names.index(name)])

    def se_of(self, name: str) -> float:
        return float(self.se[self.names.index(name)])

    def to_json(self) -> str:
        payload = {
            "coefficients": {n: float(b) for n, b in zip(self.names, self.coef)},
            "standard_errors": {n: float(s) for n, s in zip(self.names, self.se)},
            "r_squared": self.r_squared,
            "n_obs": self.n_obs,
            "n_singletons_dropped": self.n_singletons_dropped,
        }
        if self.first_stage_f is not None:
            payload["first_stage_f"] = self.first_stage_f
            payload["conditional_f"] = self.conditional_f
        payload.update({k: v for k, v in self.diagnostics.items() if _is_jsonable(v)})
        return json.dumps(payload, indent=2, sort_keys=True)

    def format_table(self) -> str:
        width = max(12, max(len(n) for n in self.names))
        lines = [f"{'':{width}}  {'coef':>12}  {'se':>12}"]
        for name, b, s in zip(self.names, self.coef, self.se):
            lines.append(f"{name:{width}}  {b:>12.4f}  {s:>12.4f}")
        lines.append(f"{'R2':{width}}  {self.r_squared:>12.4f}")
        lines.append(f"{'N':{width}}  {self.n_obs:>12d}")
        if self.first_stage_f:
            for name, f_stat in self.first_stage_f.items():
                lines.append(f"{'F(' + name + ')':{width}}  {f_stat:>12.2f}")
        return "\n".join(lines)


def _is_jsonable(value) -> bool:
    return isinstance(value, (bool, int, float, str)) or value is None


def _group_codes(frame: pd.DataFrame, dims) -> list:
    return [pd.factorize(frame[d], sort=False)[0] for d in dims]


def _weighted_demean(matrix: np.ndarray, codes, weights: np.ndarray,
                     tol: float = WITHIN_TOL, max_sweeps: int = 500):
    """Alternating weighted projections; returns (demeaned, max residual)."""
    out = matrix.copy()
    if not codes:
        return out, 0.0
    wsum = [np.bincount(c, weights=weights) for c in codes]
    shift = 0.0
    for _ in range(max_sweeps):
        shift = 0.0
        for c, denom in zip(codes, wsum):
            for k in range(out.shape[1]):
                means = np.bincount(c, weights=weights * out[:, k]) / denom
                adj = means[c]
                out[:, k] -= adj
                shift = max(shift, float(np.max(np.abs(adj))))
        if shift < tol:
            return out, shift
    raise ConvergenceError(
        f"fixed-effect absorption stalled at residual {shift:.3e} (tol {tol:g})"
    )


def within_transform(data: pd.DataFrame, fe_dims) -> pd.DataFrame:
    """Demean every numeric column within the fixed-effect cells.

    Alternating projections run until the largest remaining cell mean is
    at or below 1e-10, which makes the transform idempotent at that
    tolerance.  Non-numeric columns pass through unchanged.
    """
    fe_dims = tuple(fe_dims)
    for dim in fe_dims:
        if dim not in data.columns:
            raise DataSchemaError(f"fixed-effect dimension {dim!r} missing from data")
    out = data.copy()
    numeric = [
        c for c in out.columns
        if c not in fe_dims and pd.api.types.is_numeric_dtype(out[c])
    ]
    if not numeric or not fe_dims:
        return out
    codes = _group_codes(out, fe_dims)
    weights = np.ones(len(out))
    matrix = out[numeric].to_numpy(dtype=np.float64)
    demeaned, _ = _weighted_demean(matrix, codes, weights)
    out[numeric] = demeaned
    return out


def _drop_singletons(frame: pd.DataFrame, fe_dims) -> tuple:
    """Iteratively drop rows alone in any FE cell; returns (frame, count)."""
    dropped = 0
    while True:
        keep = np.ones(len(frame), dtype=bool)
        for dim in fe_dims:
            counts = frame.groupby(dim, sort=False)[dim].transform("size")
            keep &= counts.to_numpy() > 1
        if keep.all():
            return frame, dropped
        dropped += int((~keep).sum())
        frame = frame.loc[keep]


def _prepare(spec: RegressionSpec, data: pd.DataFrame):
    needed = [spec.dependent, *spec.regressors, *spec.fe_dims, *spec.cluster_dims]
    needed += [z for z in spec.instruments if z not in needed]
    if spec.weight is not None:
        needed.append(spec.weight)
    for col in needed:
        if col not in data.columns:
            raise DataSchemaError(f"column {col!r} missing from data")

    frame = data[list(dict.fromkeys(needed))].reset_index(drop=True)
    value_cols = [c for c in frame.columns if c not in spec.fe_dims + spec.cluster_dims]
    values = frame[value_cols].to_numpy(dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise DataSchemaError("regression data contain non-finite values")

    frame, n_singletons = _drop_singletons(frame, spec.fe_dims)
    if n_singletons:
        logger.info("dropped %d singleton fixed-effect rows", n_singletons)
    if len(frame) <= len(spec.regressors):
        raise DataSchemaError("not enough observations after singleton drop")
    frame = frame.reset_index(drop=True)

    for dim in spec.cluster_dims:
        if frame[dim].nunique() < 2:
            raise DataSchemaError(f"cluster dimension {dim!r} has fewer than 2 clusters")

    weights = (
        frame[spec.weight].to_numpy(dtype=np.float64)
        if spec.weight is not None
        else np.ones(len(frame))
    )
    if spec.weight is not None and (np.any(weights < 0.0) or weights.sum() <= 0.0):
        raise DataSchemaError("weights must be non-negative with positive total")

    y = frame[spec.dependent].to_numpy(dtype=np.float64)
    x = frame[list(spec.regressors)].to_numpy(dtype=np.float64)
    z = (
        frame[list(spec.instruments)].to_numpy(dtype=np.float64)
        if spec.instruments
        else None
    )

    codes = _group_codes(frame, spec.fe_dims)
    stacked = np.column_stack([y, x] if z is None else [y, x, z])
    demeaned, _ = _weighted_demean(stacked, codes, weights)
    y_t = demeaned[:, 0]
    x_t = demeaned[:, 1 : 1 + x.shape[1]]
    z_t = demeaned[:, 1 + x.shape[1] :] if z is not None else None
    return frame, y_t, x_t, z_t, weights, n_singletons


def _solve_spd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(
            "regressor cross-product is singular after absorption"
        ) from exc


def _cluster_meat(scores: np.ndarray, labels: np.ndarray) -> tuple:
    codes, uniques = pd.factorize(labels, sort=False)
    n_clusters = len(uniques)
    k = scores.shape[1]
    sums = np.zeros((n_clusters, k))
    for col in range(k):
        sums[:, col] = np.bincount(codes, weights=scores[:, col])
    return sums.T @ sums, n_clusters


def _truncate_psd(matrix: np.ndarray) -> np.ndarray:
    matrix = 0.5 * (matrix + matrix.T)
    eigenvalues, vectors = np.linalg.eigh(matrix)
    clipped = np.clip(eigenvalues, 0.0, None)
    if clipped.min() != eigenvalues.min():
        logger.info("two-way cluster covariance truncated at zero eigenvalue")
    return (vectors * clipped) @ vectors.T


def _robust_cov(bread: np.ndarray, scores: np.ndarray, frame: pd.DataFrame,
                cluster_dims, n_obs: int, k: int) -> np.ndarray:
    if not cluster_dims:
        meat = scores.T @ scores
        correction = n_obs / max(n_obs - k, 1)
        return _truncate_psd(bread @ (correction * meat) @ bread)

    def component(dims) -> np.ndarray:
        if len(dims) == 1:
            labels = frame[dims[0]].to_numpy()
        else:
            labels = (
                frame[dims[0]].astype(str) + "\x1f" + frame[dims[1]].astype(str)
            ).to_numpy()
        meat, n_clusters = _cluster_meat(scores, labels)
        correction = (
            n_clusters / max(n_clusters - 1, 1) * (n_obs - 1) / max(n_obs - k, 1)
        )
        return correction * (bread @ meat @ bread)

    total = component((cluster_dims[0],))
    if len(cluster_dims) == 2:
        total = total + component((cluster_dims[1],)) - component(cluster_dims)
    return _truncate_psd(total)


def _within_r2(y: np.ndarray, residuals: np.ndarray, weights: np.ndarray) -> float:
    mean = float(np.average(y, weights=weights))
    tss = float(weights @ (y - mean) ** 2)
    rss = float(weights @ residuals**2)
    if tss <= 0.0:
        return 1.0 if rss <= 0.0 else 0.0
    return 1.0 - rss / tss


def ols(spec: RegressionSpec, data: pd.DataFrame) -> FitResult:
    """Weighted least squares with absorbed fixed effects.

    Covariance is cluster-robust over ``spec.cluster_dims`` (two-way via
    inclusion-exclusion) or heteroskedasticity-robust when no clusters
    are given.
    """
    if spec.instruments:
        raise ConfigError("spec carries instruments; use tsls")
    frame, y, x, _, weights, n_singletons = _prepare(spec, data)
    n, k = x.shape
    if np.linalg.matrix_rank(x) < k:
        raise SingularSystemError("regressors are collinear after absorption")
    xtwx = x.T @ (x * weights[:, None])
    beta = _solve_spd(xtwx, x.T @ (weights * y))
    residuals = y - x @ beta
    bread = np.linalg.inv(xtwx)
    scores = x * (weights * residuals)[:, None]
    cov = _robust_cov(bread, scores, frame, spec.cluster_dims, n, k)
    return FitResult(
        names=tuple(spec.regressors),
        coef=beta,
        cov=cov,
        r_squared=_within_r2(y, residuals, weights),
        n_obs=n,
        n_singletons_dropped=n_singletons,
    )


def _first_stage_f(x_col: np.ndarray, z: np.ndarray, excluded: np.ndarray,
                   weights: np.ndarray, frame: pd.DataFrame, cluster_dims) -> float:
    """Robust Wald F on the excluded instruments in one first stage."""
    n, l_all = z.shape
    ztwz = z.T @ (z * weights[:, None])
    try:
        pi = np.linalg.solve(ztwz, z.T @ (weights * x_col))
    except np.linalg.LinAlgError:
        return float("nan")
    residuals = x_col - z @ pi
    bread = np.linalg.inv(ztwz)
    scores = z * (weights * residuals)[:, None]
    cov = _robust_cov(bread, scores, frame, cluster_dims, n, l_all)
    sub = np.ix_(excluded, excluded)
    try:
        wald = pi[excluded] @ np.linalg.solve(cov[sub], pi[excluded])
    except np.linalg.LinAlgError:
        return float("nan")
    return float(wald / len(excluded))


def tsls(spec: RegressionSpec, data: pd.DataFrame) -> FitResult:
    """Two-stage least squares with absorbed fixed effects.

    Regressors listed in ``spec.instruments`` instrument themselves;
    the rest are endogenous and need at least as many excluded
    instruments.  Reports per-endogenous first-stage F and a
    Sanderson-Windmeijer-style conditional F that partials out the other
    endogenous regressors before judging instrument strength.
    """
    if not spec.instruments:
        raise ConfigError("tsls needs instruments; use ols")
    frame, y, x, z, weights, n_singletons = _prepare(spec, data)
    n, k = x.shape
    if np.linalg.matrix_rank(z) < z.shape[1]:
        raise SingularSystemError("instruments are collinear after absorption")

    ztwz = z.T @ (z * weights[:, None])
    x_hat = z @ _solve_spd(ztwz, z.T @ (x * weights[:, None]))
    if np.linalg.matrix_rank(x_hat) < k:
        raise SingularSystemError("projected regressors are collinear; instruments too weak")

    xhat_w_xhat = x_hat.T @ (x_hat * weights[:, None])
    beta = _solve_spd(xhat_w_xhat, x_hat.T @ (weights * y))
    residuals = y - x @ beta
    bread = np.linalg.inv(xhat_w_xhat)
    scores = x_hat * (weights * residuals)[:, None]
    cov = _robust_cov(bread, scores, frame, spec.cluster_dims, n, k)

    endogenous_idx = [
        i for i, name in enumerate(spec.regressors) if name not in spec.instruments
    ]
    excluded_idx = np.array(
        [i for i, name in enumerate(spec.instruments) if name not in spec.regressors],
        dtype=np.int64,
    )
    first_stage = {}
    conditional = {}
    n_endog = len(endogenous_idx)
    for i in endogenous_idx:
        name = spec.regressors[i]
        first_stage[name] = _first_stage_f(
            x[:, i], z, excluded_idx, weights, frame, spec.cluster_dims
        )
        others = [j for j in endogenous_idx if j != i]
        if not others:
            conditional[name] = first_stage[name]
            continue
        # partial the other endogenous regressors out with their fitted
        # values before measuring the remaining instrument strength
        x_others = x_hat[:, others]
        gram = x_others.T @ (x_others * weights[:, None])
        coefs = _solve_spd(gram, x_others.T @ (weights * x[:, i]))
        partial = x[:, i] - x_others @ coefs
        raw = _first_stage_f(partial, z, excluded_idx, weights, frame, spec.cluster_dims)
        adjust = len(excluded_idx) / max(len(excluded_idx) - n_endog + 1, 1)
        conditional[name] = raw * adjust

    weak = any(f < WEAK_INSTRUMENT_F for f in conditional.values()) if conditional else False
    if weak:
        logger.warning("conditional first-stage F below %.0f", WEAK_INSTRUMENT_F)
    return FitResult(
        names=tuple(spec.regressors),
        coef=beta,
        cov=cov,
        r_squared=_within_r2(y, residuals, weights),
        n_obs=n,
        first_stage_f=first_stage,
        conditional_f=conditional,
        n_singletons_dropped=n_singletons,
        diagnostics={"weak_instrument": weak},
    )
