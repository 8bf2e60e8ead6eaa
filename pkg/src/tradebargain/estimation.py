"""Structural estimation of the bargaining parameters (phi, theta).

The identifying object is the within-exporter log price gap across two
buyers of the same product in the same year, which equals the bilateral
log markup gap plus match-level cost noise.  `build_pair_moments` turns a
SharePanel into canonical buyer pairs; `nls_joint` minimizes the sum of
squared gap residuals over the box 0.01 <= phi <= 0.99, 0.01 <= theta <= 1;
`gmm_estimate` adds instruments, fixed-effect demeaning of the residual,
and two-step optimal weighting with sandwich standard errors;
`estimate_restricted_theta1` repeats the criterion with theta pinned at 1
for the misspecification study.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import optimize
from scipy.special import expit

from .errors import ConfigError, DataSchemaError, SingularSystemError
from .panel import MonteCarloDesign, SharePanel, generate_montecarlo_blocks
from .pricing import BilateralShares, CalibratedParams, bilateral_markup

__all__ = [
    "PairMoment",
    "GmmConfig",
    "KappaSpec",
    "EstimateResult",
    "PhiStats",
    "build_pair_moments",
    "gmm_estimate",
    "nls_joint",
    "estimate_restricted_theta1",
    "logistic_phi",
    "implied_phi_stats",
    "montecarlo_study",
    "summarize_study",
]

logger = logging.getLogger(__name__)

PHI_BOX = (0.01, 0.99)
THETA_BOX = (0.01, 1.0)

# build-time instrument layout of PairMoment.instruments
INSTRUMENT_NAMES = (
    "const",
    "n_importers",
    "n_exporters",
    "loo_mean_s",
    "loo_mean_x",
    "loo_median_s",
    "loo_median_x",
)


def _logit(p):
    return np.log(p) - np.log1p(-p)


@dataclass(frozen=True)
class PairMoment:
    """One canonical buyer pair (j, ell) of an exporter-product-year cell.

    ``gap`` is ln p_ij - ln p_iell.  ``degenerate`` marks pairs whose two
    matches have identical shares: they carry no identifying weight but are
    retained.  ``instruments`` holds panel-level instrument values computed
    at build time so the GMM step needs no further panel access.
    """

    exporter: str
    product: str
    year: int
    buyer_j: str
    buyer_ell: str
    gap: float
    s_j: float
    x_j: float
    s_ell: float
    x_ell: float
    covariates_j: tuple = ()
    covariates_ell: tuple = ()
    instruments: tuple = ()
    degenerate: bool = False

    def __post_init__(self) -> None:
        if self.buyer_j == self.buyer_ell:
            raise DataSchemaError("a pair moment needs two distinct buyers")


@dataclass(frozen=True)
class GmmConfig:
    """Instrument list, demeaning dimensions, and weighting for the GMM step.

    The default instruments are the constant, the counts of distinct
    importers and exporters in the product-year, and the within-year mean
    and median of each bilateral share computed excluding the two focal
    matches of the moment.  ``demean_dims`` may contain "product", "year",
    and "buyer" (the canonical buyer pair); the residual vector is demeaned
    by alternating projections over those groupings.  phi is estimated on
    the log-odds scale unless ``covariate_names`` is non-empty, in which
    case phi_ij = logistic(X_ij kappa) with an intercept-first kappa.
    """

    instruments: tuple = (
        "const",
        "n_importers",
        "n_exporters",
        "loo_mean_s",
        "loo_mean_x",
        "loo_median_s",
        "loo_median_x",
    )
    demean_dims: tuple = ("product", "year", "buyer")
    two_step: bool = True
    covariate_names: tuple = ()
    n_starts: int = 8
    seed: int = 0

    def __post_init__(self) -> None:
        known = {"product", "year", "buyer"}
        bad = set(self.demean_dims) - known
        if bad:
            raise ConfigError(f"unknown demeaning dimensions {sorted(bad)}")
        n_params = 2 if not self.covariate_names else 2 + len(self.covariate_names)
        if len(self.instruments) < n_params:
            raise ConfigError(
                f"{len(self.instruments)} instruments cannot identify {n_params} parameters"
            )
        unknown = set(self.instruments) - set(INSTRUMENT_NAMES)
        if unknown:
            raise ConfigError(
                f"unknown instruments {sorted(unknown)}; available: {', '.join(INSTRUMENT_NAMES)}"
            )
        if self.n_starts < 1:
            raise ConfigError("n_starts must be >= 1")


@dataclass(frozen=True)
class KappaSpec:
    """Covariate names and coefficient vector (intercept first) mapping
    match characteristics into a bargaining weight via the logistic link."""

    names: tuple
    kappa: tuple

    def __post_init__(self) -> None:
        if len(self.kappa) != len(self.names) + 1:
            raise ConfigError("kappa must have one coefficient per name plus an intercept")
        if not np.all(np.isfinite(self.kappa)):
            raise ConfigError("kappa coefficients must be finite")


@dataclass
class EstimateResult:
    """Point estimates with robust covariance and convergence diagnostics.

    ``params`` is the internal parameter vector: (phi_bar, theta) for the
    logistic parameterization, (phi, theta) for the direct one, (kappa...,
    theta) for covariate-driven phi, and (phi,) for the theta = 1
    restricted estimator.  ``cov`` is the robust covariance on that same
    scale.
    """

    params: np.ndarray
    cov: np.ndarray
    parameterization: str
    theta: float
    phi: float | None
    objective: float
    converged: bool
    boundary: bool
    n_moments: int
    method: str
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0.0 < self.theta <= 1.0:
            raise DataSchemaError(f"estimated theta = {self.theta:g} out of (0, 1]")
        if self.phi is not None and not 0.0 < self.phi < 1.0:
            raise DataSchemaError(f"implied phi = {self.phi:g} out of (0, 1)")

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))

    @property
    def phi_se(self) -> float | None:
        """Delta-method standard error of the implied phi point estimate."""
        if self.phi is None:
            return None
        if self.parameterization == "logistic":
            return float(self.phi * (1.0 - self.phi) * self.se[0])
        return float(self.se[0])


@dataclass(frozen=True)
class PhiStats:
    mean: float
    median: float
    mean_se: float
    median_se: float


def build_pair_moments(panel: SharePanel, covariate_columns=()) -> list[PairMoment]:
    """All canonical (j, ell) buyer pairs within exporter-product-year cells.

    Pairs are oriented by ascending buyer id.  Cells with a single buyer
    yield no moments.  Instrument values (product-year participant counts
    and leave-two-out within-year share moments) are attached to each pair.
    """
    f = panel.frame.reset_index(drop=True)
    for col in covariate_columns:
        if col not in f.columns:
            raise DataSchemaError(f"covariate column {col!r} missing from the share panel")

    n_imp = f.groupby(["product", "year"], sort=False)["importer"].transform("nunique").to_numpy()
    n_exp = f.groupby(["product", "year"], sort=False)["exporter"].transform("nunique").to_numpy()

    lnp = np.log(f["price"].to_numpy(dtype=np.float64))
    s = f["s"].to_numpy(dtype=np.float64)
    x = f["x"].to_numpy(dtype=np.float64)
    covs = {c: f[c].to_numpy(dtype=np.float64) for c in covariate_columns}

    # per-year sorted share pools for exact leave-two-out statistics
    year_codes, year_keys = pd.factorize(f["year"], sort=True)
    pools = {}
    for t in range(len(year_keys)):
        rows = np.flatnonzero(year_codes == t)
        pool = {}
        for name, arr in (("s", s), ("x", x)):
            order = rows[np.argsort(arr[rows], kind="stable")]
            rank = np.empty(len(rows), dtype=np.int64)
            rank[np.argsort(order, kind="stable")] = np.arange(len(rows))
            rank_of_row = dict(zip(order.tolist(), range(len(rows))))
            pool[name] = (arr[order], rank_of_row, arr[rows].sum())
        pools[t] = pool

    def loo_mean(pool, row_a, row_b):
        values, rank_of, total = pool
        n = len(values)
        if n <= 2:
            return float(values.mean())
        return float((total - values[rank_of[row_a]] - values[rank_of[row_b]]) / (n - 2))

    def loo_median(pool, row_a, row_b):
        values, rank_of, _ = pool
        n = len(values)
        if n <= 2:
            return float(np.median(values))
        ru, rv = sorted((rank_of[row_a], rank_of[row_b]))

        def remaining(k):
            j = k
            if j >= ru:
                j += 1
            if j >= rv:
                j += 1
            return values[j]

        m = n - 2
        if m % 2:
            return float(remaining((m - 1) // 2))
        return float(0.5 * (remaining(m // 2 - 1) + remaining(m // 2)))

    moments: list[PairMoment] = []
    grouped = f.groupby(["exporter", "product", "year"], sort=False).indices
    for (exporter, product, year), rows in grouped.items():
        if len(rows) < 2:
            continue
        order = np.argsort(f["importer"].to_numpy()[rows], kind="stable")
        rows = rows[order]
        ycode = year_codes[rows[0]]
        pool_s, pool_x = pools[ycode]["s"], pools[ycode]["x"]
        for a, b in itertools.combinations(rows, 2):
            inst = (
                1.0,
                float(n_imp[a]),
                float(n_exp[a]),
                loo_mean(pool_s, a, b),
                loo_mean(pool_x, a, b),
                loo_median(pool_s, a, b),
                loo_median(pool_x, a, b),
            )
            moments.append(
                PairMoment(
                    exporter=str(exporter),
                    product=str(product),
                    year=int(year),
                    buyer_j=str(f["importer"].iat[a]),
                    buyer_ell=str(f["importer"].iat[b]),
                    gap=float(lnp[a] - lnp[b]),
                    s_j=float(s[a]),
                    x_j=float(x[a]),
                    s_ell=float(s[b]),
                    x_ell=float(x[b]),
                    covariates_j=tuple(covs[c][a] for c in covariate_columns),
                    covariates_ell=tuple(covs[c][b] for c in covariate_columns),
                    instruments=inst,
                    degenerate=bool(s[a] == s[b] and x[a] == x[b]),
                )
            )
    n_degenerate = sum(m.degenerate for m in moments)
    if n_degenerate:
        logger.info("build_pair_moments: %d of %d pairs are degenerate", n_degenerate, len(moments))
    return moments


@dataclass(frozen=True)
class _PhiTheta:
    """Parameter carrier allowing vector phi during objective evaluation."""

    phi: object
    theta: float


class _MomentArrays:
    """Vectorized view of a moment list for fast objective evaluation."""

    def __init__(self, moments, covariate_dim: int = 0):
        if not moments:
            raise DataSchemaError("no pair moments to estimate from")
        n = len(moments)
        self.n = n
        self.gap = np.array([m.gap for m in moments])
        self.s = np.concatenate([[m.s_j for m in moments], [m.s_ell for m in moments]])
        self.x = np.concatenate([[m.x_j for m in moments], [m.x_ell for m in moments]])
        self.shares = BilateralShares(s=self.s, x=self.x)
        if covariate_dim:
            cj = np.array([m.covariates_j for m in moments], dtype=np.float64)
            ce = np.array([m.covariates_ell for m in moments], dtype=np.float64)
            if cj.shape[1] != covariate_dim or ce.shape[1] != covariate_dim:
                raise DataSchemaError("moments do not carry the configured covariates")
            ones = np.ones((n, 1))
            self.design = np.vstack([np.hstack([ones, cj]), np.hstack([ones, ce])])
        else:
            self.design = None
        self.z = np.array([m.instruments for m in moments], dtype=np.float64)
        self.product = np.array([m.product for m in moments], dtype=object)
        self.year = np.array([m.year for m in moments])
        self.pair = np.array([m.buyer_j + "|" + m.buyer_ell for m in moments], dtype=object)

    def markup_gap(self, phi, theta: float, cp: CalibratedParams) -> np.ndarray:
        # phi may be a scalar or a per-row vector on the stacked layout;
        # bilateral_markup duck-types the params object for that case
        lnmu = np.log(np.asarray(bilateral_markup(self.shares, _PhiTheta(phi, theta), cp).mu))
        return lnmu[: self.n] - lnmu[self.n :]


def _demean(v: np.ndarray, groups, tol: float = 1e-12, max_sweeps: int = 200) -> np.ndarray:
    """Alternating projections onto the orthocomplement of group dummies."""
    out = np.asarray(v, dtype=np.float64).copy()
    codes = []
    for g in groups:
        c, _ = pd.factorize(g, sort=False)
        codes.append(c)
    if not codes:
        return out
    for _ in range(max_sweeps):
        shift = 0.0
        for c in codes:
            means = np.bincount(c, weights=out) / np.bincount(c)
            adj = means[c]
            out -= adj
            shift = max(shift, float(np.max(np.abs(adj))) if adj.size else 0.0)
        if shift < tol:
            break
    return out


def _minimize_box(fun, bounds, n_starts: int, seed: int, extra_starts=()):
    """Multi-start Nelder-Mead over a box, each refined by L-BFGS-B."""
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    starts = [0.5 * (lo + hi)]
    starts += [np.asarray(s, dtype=np.float64) for s in extra_starts]
    while len(starts) < n_starts:
        starts.append(lo + (hi - lo) * rng.uniform(size=len(bounds)))
    best = None
    for s0 in starts[:max(n_starts, len(starts))]:
        nm = optimize.minimize(
            fun,
            s0,
            method="Nelder-Mead",
            bounds=bounds,
            options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 2000},
        )
        polish = optimize.minimize(
            fun,
            nm.x,
            method="L-BFGS-B",
            bounds=bounds,
            options={"ftol": 1e-16, "gtol": 1e-12, "maxiter": 500},
        )
        cand = polish if polish.fun <= nm.fun else nm
        # L-BFGS-B can report an abnormal line search at an exact optimum
        # (objective already at numerical zero); either stage succeeding
        # validates the point
        cand.success = bool(nm.success or polish.success)
        if best is None or cand.fun < best.fun:
            best = cand
    on_edge = bool(
        np.any(np.abs(best.x - lo) <= 1e-6 * (hi - lo))
        or np.any(np.abs(best.x - hi) <= 1e-6 * (hi - lo))
    )
    return best, on_edge


def _fd_jacobian(fun, beta, rel: float = 1e-6):
    """Central finite differences of a vector-valued function of beta."""
    beta = np.asarray(beta, dtype=np.float64)
    f0 = np.asarray(fun(beta))
    jac = np.empty((f0.size, beta.size))
    for k in range(beta.size):
        h = rel * max(1.0, abs(beta[k]))
        up, dn = beta.copy(), beta.copy()
        up[k] += h
        dn[k] -= h
        jac[:, k] = (np.asarray(fun(up)) - np.asarray(fun(dn))) / (2.0 * h)
    return jac


def logistic_phi(x, kappa):
    """phi = logistic(x @ kappa), stable for large magnitudes.

    ``x`` is a covariate row or matrix whose first entry multiplies the
    intercept coefficient.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    kappa = np.asarray(kappa, dtype=np.float64)
    out = expit(x @ kappa)
    return float(out[0]) if out.size == 1 else out


def _clip_theta(theta: float) -> float:
    return float(min(max(theta, THETA_BOX[0]), THETA_BOX[1]))


def nls_joint(
    moments,
    calibration: CalibratedParams,
    init=None,
    parameterization: str = "direct",
    n_starts: int = 8,
    seed: int = 0,
) -> EstimateResult:
    """Joint (phi, theta) by least squares on the pair gaps.

    ``parameterization`` chooses whether the optimizer walks phi directly
    inside the box or its log-odds transform; both give the same implied
    phi.  ``init`` adds an extra starting point to the multi-start list.
    """
    if parameterization not in ("direct", "logistic"):
        raise ConfigError(f"unknown parameterization {parameterization!r}")
    arrays = _MomentArrays(moments)

    if parameterization == "direct":
        bounds = [PHI_BOX, THETA_BOX]
        to_phi = lambda b: float(b[0])
    else:
        bounds = [(_logit(PHI_BOX[0]), _logit(PHI_BOX[1])), THETA_BOX]
        to_phi = lambda b: float(expit(b[0]))

    def resid(beta):
        return arrays.gap - arrays.markup_gap(to_phi(beta), _clip_theta(beta[1]), calibration)

    def objective(beta):
        r = resid(beta)
        return float(r @ r)

    extra = []
    if init is not None:
        phi0, theta0 = float(init[0]), float(init[1])
        extra.append([phi0 if parameterization == "direct" else _logit(phi0), theta0])
    best, on_edge = _minimize_box(objective, bounds, n_starts, seed, extra_starts=extra)

    r = resid(best.x)
    jac = _fd_jacobian(resid, best.x)
    jtj = jac.T @ jac
    try:
        bread = np.linalg.inv(jtj)
        meat = jac.T @ (jac * (r**2)[:, None])
        cov = bread @ meat @ bread
    except np.linalg.LinAlgError:
        cov = np.full((2, 2), np.nan)
    phi_hat = to_phi(best.x)
    return EstimateResult(
        params=np.asarray(best.x, dtype=np.float64),
        cov=cov,
        parameterization=parameterization,
        theta=_clip_theta(best.x[1]),
        phi=phi_hat,
        objective=float(best.fun),
        converged=bool(best.success),
        boundary=on_edge,
        n_moments=arrays.n,
        method="nls",
        diagnostics={"n_starts": n_starts, "message": str(best.message)},
    )


def estimate_restricted_theta1(
    moments, calibration: CalibratedParams, n_starts: int = 4, seed: int = 0
) -> EstimateResult:
    """Estimate phi alone with theta restricted to 1 (the misspecified fit)."""
    arrays = _MomentArrays(moments)

    def resid(beta):
        return arrays.gap - arrays.markup_gap(float(beta[0]), 1.0, calibration)

    def objective(beta):
        r = resid(beta)
        return float(r @ r)

    best, on_edge = _minimize_box(objective, [PHI_BOX], n_starts, seed)
    r = resid(best.x)
    jac = _fd_jacobian(resid, best.x)
    jtj = float((jac[:, 0] ** 2).sum())
    if jtj > 0.0:
        meat = float((jac[:, 0] ** 2 * r**2).sum())
        cov = np.array([[meat / jtj**2]])
    else:
        cov = np.array([[np.nan]])
    return EstimateResult(
        params=np.asarray(best.x, dtype=np.float64),
        cov=cov,
        parameterization="direct",
        theta=1.0,
        phi=float(best.x[0]),
        objective=float(best.fun),
        converged=bool(best.success),
        boundary=on_edge,
        n_moments=arrays.n,
        method="nls-theta1",
        diagnostics={"n_starts": n_starts},
    )


def gmm_estimate(moments, cfg: GmmConfig, calibration: CalibratedParams) -> EstimateResult:
    """Two-step GMM on instrumented, demeaned pair-gap residuals.

    Step one minimizes the quadratic form with the identity weighting; the
    second step reweights with the inverse of the HC-robust moment
    covariance from first-step residuals.  When first-step residuals are
    numerically zero the reweighting is undefined and the identity-weight
    estimate is returned, flagged in the diagnostics.
    """
    n_cov = len(cfg.covariate_names)
    arrays = _MomentArrays(moments, covariate_dim=n_cov)
    if arrays.z.shape[1] != len(INSTRUMENT_NAMES):
        raise DataSchemaError("moments carry fewer instruments than the config requests")
    z = arrays.z[:, [INSTRUMENT_NAMES.index(name) for name in cfg.instruments]]
    if np.linalg.matrix_rank(z) < z.shape[1]:
        spans = np.ptp(z, axis=0) <= 1e-12
        constant = [
            name for name, flat in zip(cfg.instruments, spans) if flat and name != "const"
        ]
        hint = (
            f" (constant columns beside the intercept: {', '.join(constant)})"
            if constant
            else ""
        )
        raise SingularSystemError(
            f"instrument matrix is rank deficient; drop collinear instruments{hint}"
        )

    groups = []
    if "product" in cfg.demean_dims:
        groups.append(arrays.product)
    if "year" in cfg.demean_dims:
        groups.append(arrays.year)
    if "buyer" in cfg.demean_dims:
        groups.append(arrays.pair)

    if n_cov:
        kdim = 1 + n_cov
        bounds = [(-12.0, 12.0)] * kdim + [THETA_BOX]

        def phi_of(beta):
            return expit(arrays.design @ np.asarray(beta[:kdim]))

    else:
        bounds = [(_logit(PHI_BOX[0]), _logit(PHI_BOX[1])), THETA_BOX]

        def phi_of(beta):
            return float(expit(beta[0]))

    def residual(beta):
        g = arrays.gap - arrays.markup_gap(phi_of(beta), _clip_theta(beta[-1]), calibration)
        return _demean(g, groups)

    n = arrays.n

    def moment_mean(beta):
        return z.T @ residual(beta) / n

    def objective_factory(w):
        def objective(beta):
            m = moment_mean(beta)
            return float(n * m @ w @ m)

        return objective

    identity = np.eye(z.shape[1])
    step1, edge1 = _minimize_box(
        objective_factory(identity), bounds, cfg.n_starts, cfg.seed
    )
    g1 = residual(step1.x)
    s_hat = (z * g1[:, None] ** 2).T @ z / n

    # reweighting by inv(s_hat) is meaningless when first-step residuals
    # are numerical zeros of the gap scale rather than sampling noise
    noiseless = float(np.max(np.abs(g1))) <= 1e-9 * max(
        1.0, float(np.max(np.abs(arrays.gap)))
    )
    if cfg.two_step and not noiseless:
        try:
            w2 = np.linalg.inv(s_hat)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(
                "optimal weighting matrix is singular; instruments carry no "
                "independent variation"
            ) from exc
        best, on_edge = _minimize_box(
            objective_factory(w2), bounds, cfg.n_starts, cfg.seed, extra_starts=[step1.x]
        )
        w_used = w2
    else:
        best, on_edge, w_used = step1, edge1, identity

    g_jac = _fd_jacobian(moment_mean, best.x)
    g_best = residual(best.x)
    s_best = (z * g_best[:, None] ** 2).T @ z / n
    gwg = g_jac.T @ w_used @ g_jac
    try:
        bread = np.linalg.inv(gwg)
        cov = bread @ g_jac.T @ w_used @ s_best @ w_used @ g_jac @ bread / n
    except np.linalg.LinAlgError:
        cov = np.full((len(best.x), len(best.x)), np.nan)

    theta_hat = _clip_theta(best.x[-1])
    if n_cov:
        phi_point = None
        parameterization = "kappa"
    else:
        phi_point = float(expit(best.x[0]))
        parameterization = "logistic"
    return EstimateResult(
        params=np.asarray(best.x, dtype=np.float64),
        cov=cov,
        parameterization=parameterization,
        theta=theta_hat,
        phi=phi_point,
        objective=float(best.fun),
        converged=bool(best.success),
        boundary=on_edge,
        n_moments=n,
        method="gmm",
        diagnostics={
            "two_step": cfg.two_step and not noiseless,
            "noiseless_first_step": noiseless,
            "instruments": list(cfg.instruments),
        },
    )


def implied_phi_stats(result: EstimateResult, panel: SharePanel | None = None,
                      covariate_columns=()) -> PhiStats:
    """Mean and median of the implied bargaining weights with delta-method SEs.

    Constant-phi results collapse to the point estimate.  For covariate
    models the statistics run over the panel rows, holding covariates fixed.
    """
    if result.parameterization != "kappa":
        phi = float(result.phi)
        se = float(result.phi_se)
        return PhiStats(mean=phi, median=phi, mean_se=se, median_se=se)
    if panel is None:
        raise ConfigError("covariate models need the panel to evaluate implied phi")
    f = panel.frame
    for col in covariate_columns:
        if col not in f.columns:
            raise DataSchemaError(f"covariate column {col!r} missing from the share panel")
    kdim = 1 + len(covariate_columns)
    design = np.hstack(
        [np.ones((len(f), 1))]
        + [f[c].to_numpy(dtype=np.float64)[:, None] for c in covariate_columns]
    )
    kappa = result.params[:kdim]
    cov_k = result.cov[:kdim, :kdim]
    phi = expit(design @ kappa)
    weight = phi * (1.0 - phi)
    grad_mean = (design * weight[:, None]).mean(axis=0)
    mean_se = float(np.sqrt(grad_mean @ cov_k @ grad_mean))
    order = np.argsort(phi, kind="stable")
    nrows = len(phi)
    if nrows % 2:
        mid = [order[nrows // 2]]
    else:
        mid = [order[nrows // 2 - 1], order[nrows // 2]]
    grad_med = (design[mid] * weight[mid, None]).mean(axis=0)
    median_se = float(np.sqrt(grad_med @ cov_k @ grad_med))
    return PhiStats(
        mean=float(phi.mean()),
        median=float(np.median(phi)),
        mean_se=mean_se,
        median_se=median_se,
    )


def _estimate_one_replica(panel, calibration, estimator, n_starts, seed):
    moments = build_pair_moments(panel)
    if estimator == "joint":
        return nls_joint(moments, calibration, n_starts=n_starts, seed=seed)
    if estimator == "restricted":
        return estimate_restricted_theta1(moments, calibration, seed=seed)
    raise ConfigError(f"unknown estimator {estimator!r}")


def montecarlo_study(
    design: MonteCarloDesign,
    estimator: str = "joint",
    n_starts: int = 8,
    jobs: int = 1,
) -> pd.DataFrame:
    """Estimate every replica of a Monte Carlo design.

    Returns one row per replica with the implied phi, theta, objective,
    and flags.  ``jobs`` > 1 runs replicas in separate processes.
    """
    if estimator not in ("joint", "restricted"):
        raise ConfigError(f"unknown estimator {estimator!r}")
    panels = generate_montecarlo_blocks(design)
    args = [
        (panel, design.calibration, estimator, n_starts, design.seed + 1 + k)
        for k, panel in enumerate(panels)
    ]
    if jobs > 1:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=jobs)(delayed(_estimate_one_replica)(*a) for a in args)
    else:
        results = [_estimate_one_replica(*a) for a in args]
    return pd.DataFrame(
        {
            "replica": np.arange(design.n_replicas),
            "phi_hat": [r.phi for r in results],
            "theta_hat": [r.theta for r in results],
            "objective": [r.objective for r in results],
            "boundary": [r.boundary for r in results],
            "converged": [r.converged for r in results],
        }
    )


def summarize_study(frame: pd.DataFrame, truth) -> dict:
    """Replica-level summary against the data-generating parameters."""
    phi = frame["phi_hat"].to_numpy(dtype=np.float64)
    theta = frame["theta_hat"].to_numpy(dtype=np.float64)
    return {
        "n_replicas": int(len(frame)),
        "mean_phi": float(phi.mean()),
        "mean_theta": float(theta.mean()),
        "sd_phi": float(phi.std(ddof=1)) if len(frame) > 1 else 0.0,
        "sd_theta": float(theta.std(ddof=1)) if len(frame) > 1 else 0.0,
        "bias_phi": float(phi.mean() - truth.phi),
        "bias_theta": float(theta.mean() - truth.theta),
        "share_phi_above_truth": float((phi > truth.phi).mean()),
        "share_boundary": float(frame["boundary"].mean()),
    }
