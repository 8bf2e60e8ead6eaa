"""Command-line front end over the simulation, estimation, and validation layers.

Each subcommand writes delimited output plus a rendered figure where one
applies, and finishes with a ``manifest_<subcommand>.json`` recording the
config hash, effective seed, and library versions.  Manifests carry no
timestamps so repeated runs with the same inputs are byte-identical.

Exit codes: 0 success, 2 configuration, 3 data, 4 convergence, 5 I/O.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .config import (
    RunConfig,
    SCHEMA,
    calibrated_params,
    config_hash,
    load_config,
    structural_params,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    DataSchemaError,
    InfeasibleOutsideOptionError,
    ParameterDomainError,
    SingularSystemError,
    UnboundedMarkupError,
)
from .estimation import (
    MonteCarloDesign,
    build_pair_moments,
    estimate_restricted_theta1,
    montecarlo_study,
    nls_joint,
    summarize_study,
)
from .panel import (
    PanelConfig,
    compute_shares,
    generate_panel,
    load_transactions,
    save_transactions,
)
from .pricing import StructuralParams, heatmap_grid
from .validation import (
    aggregate_decomposition,
    iv_fit_test,
    match_changes,
    predicted_changes,
)
from . import plots

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_CONVERGENCE = 4
EXIT_IO = 5

OUT_ENV_VAR = "TRADEBARGAIN_OUT"

_CONFIG_ERRORS = (ConfigError, ParameterDomainError)
_DATA_ERRORS = (DataSchemaError,)
_CONVERGENCE_ERRORS = (
    ConvergenceError,
    SingularSystemError,
    UnboundedMarkupError,
    InfeasibleOutsideOptionError,
)


def exit_code_for(exc: BaseException) -> int | None:
    """Exit code for a recognized failure, None for anything unexpected."""
    if isinstance(exc, _CONFIG_ERRORS):
        return EXIT_CONFIG
    if isinstance(exc, _DATA_ERRORS):
        return EXIT_DATA
    if isinstance(exc, _CONVERGENCE_ERRORS):
        return EXIT_CONVERGENCE
    if isinstance(exc, OSError):
        return EXIT_IO
    return None


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    return value


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(_jsonable(payload), handle, indent=2, sort_keys=True)
        handle.write("\n")


def _resolve_out(args: argparse.Namespace, config: RunConfig) -> Path:
    if args.out is not None:
        target = args.out
    elif config.out is not None:
        target = config.out
    elif os.environ.get(OUT_ENV_VAR):
        target = os.environ[OUT_ENV_VAR]
    else:
        target = "tradebargain-out"
    path = Path(target)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _require_transactions(block: dict, subcommand: str) -> Path:
    target = block.get("transactions")
    if target is None:
        raise ConfigError(
            f"{subcommand} requires a transactions path; "
            f"set {subcommand}.transactions in the config"
        )
    path = Path(target)
    if not path.exists():
        raise DataSchemaError(f"transactions file not found: {path}")
    return path


def _changes_with_predictions(
    block: dict, subcommand: str
) -> tuple[pd.DataFrame, StructuralParams]:
    """Shared load -> shares -> changes -> predictions chain."""
    path = _require_transactions(block, subcommand)
    records = load_transactions(path)
    panel = compute_shares(records)
    changes = match_changes(panel)
    sp = structural_params(block["bargaining"])
    cp = calibrated_params(block["calibration"])
    predicted = predicted_changes(changes, sp, cp, "tariff_change")
    merged = changes.copy()
    for column in (
        "passthrough",
        "epsilon",
        "markup_elasticity",
        "cost_elasticity",
        "dlnp_hat",
        "dlnq_hat",
        "dlnr_hat",
        "dlnp_hat_markup_only",
        "dlnp_hat_cost_only",
    ):
        merged[column] = predicted[column].to_numpy()
    return merged, sp


def _write_manifest(
    out_dir: Path, subcommand: str, config: RunConfig, seed: int, jobs: int,
    outputs: list[str],
) -> Path:
    import matplotlib
    import scipy

    manifest = {
        "schema": SCHEMA,
        "subcommand": subcommand,
        "config_sha256": config_hash(config),
        "seed": seed,
        "jobs": jobs,
        "versions": {
            "tradebargain": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "pandas": pd.__version__,
            "matplotlib": matplotlib.__version__,
        },
        "outputs": sorted(outputs),
    }
    path = out_dir / f"manifest_{subcommand}.json"
    _write_json(path, manifest)
    return path


def cmd_heatmap(config: RunConfig, out_dir: Path, seed: int, jobs: int) -> list[str]:
    block = config.heatmap
    cp = calibrated_params(block["calibration"])
    resolution = int(block["resolution"])
    if resolution < 2:
        raise ConfigError("heatmap.resolution must be at least 2")
    phi_regimes = [
        ("phi-low", float(block["phi_low"])),
        ("phi-mid", float(block["phi_interior"])),
        ("phi-high", float(block["phi_high"])),
    ]
    theta_regimes = [
        ("theta-low", float(block["theta_low"])),
        ("theta-one", 1.0),
    ]
    outputs: list[str] = []
    grids: dict[tuple[str, str], pd.DataFrame] = {}
    for theta_label, theta in theta_regimes:
        for phi_label, phi in phi_regimes:
            frame = heatmap_grid(StructuralParams(phi=phi, theta=theta), cp, resolution)
            name = f"heatmap_{phi_label}_{theta_label}.csv"
            frame.to_csv(out_dir / name, index=False)
            outputs.append(name)
            grids[(theta_label, phi_label)] = frame
    plots.heatmap_figure(grids, out_dir / "heatmap.png")
    outputs.append("heatmap.png")
    return outputs


def cmd_simulate(config: RunConfig, out_dir: Path, seed: int, jobs: int) -> list[str]:
    block = config.simulate
    panel_config = PanelConfig(
        n_products=int(block["n_products"]),
        exporters_per_product=int(block["exporters_per_product"]),
        importers_per_product=int(block["importers_per_product"]),
        importer_pool=(
            None if block["importer_pool"] is None else int(block["importer_pool"])
        ),
        n_years=int(block["n_years"]),
        first_year=int(block["first_year"]),
        n_countries=int(block["n_countries"]),
        sigma_cost=float(block["sigma_cost"]),
        base_cost_sigma=float(block["base_cost_sigma"]),
        importer_size_sigma=float(block["importer_size_sigma"]),
        tariff_treat_prob=float(block["tariff_treat_prob"]),
        tariff_low=float(block["tariff_low"]),
        tariff_high=float(block["tariff_high"]),
        bargaining=structural_params(block["bargaining"]),
        calibration=calibrated_params(block["calibration"]),
        seed=seed,
    )
    records = generate_panel(panel_config)
    save_transactions(records, out_dir / "transactions.csv")
    shares = compute_shares(records)
    shares.frame.to_csv(out_dir / "shares.csv", index=False)
    return ["transactions.csv", "shares.csv"]


def cmd_estimate(config: RunConfig, out_dir: Path, seed: int, jobs: int) -> list[str]:
    block = config.estimate
    path = _require_transactions(block, "estimate")
    records = load_transactions(path)
    panel = compute_shares(records)
    moments = build_pair_moments(panel)
    cp = calibrated_params(block["calibration"])
    estimator = str(block["estimator"])
    n_starts = int(block["n_starts"])
    if estimator == "nls":
        result = nls_joint(
            moments, cp,
            parameterization=str(block["parameterization"]),
            n_starts=n_starts, seed=seed,
        )
    elif estimator == "restricted":
        result = estimate_restricted_theta1(moments, cp, n_starts=n_starts, seed=seed)
    else:
        raise ConfigError(
            f"estimate.estimator must be 'nls' or 'restricted', got {estimator!r}"
        )
    ses = np.sqrt(np.clip(np.diag(result.cov), 0.0, None))
    report = {
        "phi": result.phi,
        "theta": result.theta,
        "se": [float(v) for v in ses],
        "objective": result.objective,
        "converged": result.converged,
        "boundary": result.boundary,
        "n_moments": result.n_moments,
        "method": result.method,
        "parameterization": result.parameterization,
    }
    _write_json(out_dir / "estimate.json", report)
    return ["estimate.json"]


def cmd_montecarlo(config: RunConfig, out_dir: Path, seed: int, jobs: int) -> list[str]:
    block = config.montecarlo
    truth = structural_params(block["truth"])
    design = MonteCarloDesign(
        n_exporters=int(block["n_exporters"]),
        importers_per_exporter=int(block["importers_per_exporter"]),
        n_replicas=int(block["n_replicas"]),
        truth=truth,
        calibration=calibrated_params(block["calibration"]),
        share_law=str(block["share_law"]),
        seed=seed,
    )
    frame = montecarlo_study(
        design, estimator=str(block["estimator"]),
        n_starts=int(block["n_starts"]), jobs=jobs,
    )
    frame.to_csv(out_dir / "replicas.csv", index=False)
    summary = summarize_study(frame, truth)
    _write_json(out_dir / "summary.json", summary)

    bins = int(block["bins"])
    if bins < 1:
        raise ConfigError("montecarlo.bins must be at least 1")
    rows = []
    for parameter, column in (("phi", "phi_hat"), ("theta", "theta_hat")):
        values = frame[column].to_numpy(dtype=np.float64)
        counts, edges = np.histogram(values, bins=bins)
        for k in range(bins):
            rows.append(
                {
                    "parameter": parameter,
                    "bin_left": edges[k],
                    "bin_right": edges[k + 1],
                    "count": int(counts[k]),
                }
            )
    pd.DataFrame(rows).to_csv(out_dir / "histogram.csv", index=False)
    plots.histogram_figure(frame, truth, out_dir / "histogram.png")
    return ["replicas.csv", "summary.json", "histogram.csv", "histogram.png"]


def cmd_validate(config: RunConfig, out_dir: Path, seed: int, jobs: int) -> list[str]:
    block = config.validate
    merged, _ = _changes_with_predictions(block, "validate")
    for name in list(block["fe"]) + list(block["clusters"]):
        if name not in merged.columns:
            raise ConfigError(f"validate label column {name!r} is not in the panel")
    fe_labels = {name: merged[name] for name in block["fe"]}
    cluster_labels = {name: merged[name] for name in block["clusters"]}
    fit = iv_fit_test(
        merged["dlnp_obs"], merged["dlnp_hat"], merged["tariff_change"],
        fe_dims=fe_labels, clusters=cluster_labels,
    )
    report = {
        "beta": fit["predicted"],
        "se": fit.se_of("predicted"),
        "first_stage_f": fit.first_stage_f,
        "conditional_f": fit.conditional_f,
        "beta_minus_one_t": fit.diagnostics["beta_minus_one_t"],
        "weak_instrument": bool(fit.diagnostics.get("weak_instrument", False)),
        "r_squared": fit.r_squared,
        "n_obs": fit.n_obs,
    }
    _write_json(out_dir / "validate.json", report)
    merged.to_csv(out_dir / "changes.csv", index=False)
    plots.scatter_figure(merged["dlnp_obs"], merged["dlnp_hat"], out_dir / "scatter.png")
    return ["validate.json", "changes.csv", "scatter.png"]


def cmd_decompose(config: RunConfig, out_dir: Path, seed: int, jobs: int) -> list[str]:
    block = config.decompose
    merged, sp = _changes_with_predictions(block, "decompose")
    cp = calibrated_params(block["calibration"])
    report = aggregate_decomposition(merged, sp, cp, "tariff_change")
    _write_json(out_dir / "decompose.json", report)
    plots.decomposition_figure(report, out_dir / "decompose.png")
    return ["decompose.json", "decompose.png"]


_SUBCOMMANDS = {
    "heatmap": cmd_heatmap,
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "montecarlo": cmd_montecarlo,
    "validate": cmd_validate,
    "decompose": cmd_decompose,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tradebargain",
        description="simulate, estimate, and validate bargained trade prices",
    )
    subparsers = parser.add_subparsers(dest="subcommand", required=True)
    descriptions = {
        "heatmap": "pass-through grids over the share square, one CSV per regime",
        "simulate": "draw a synthetic transaction panel and write it as CSV",
        "estimate": "fit the bargaining parameters to a transaction panel",
        "montecarlo": "repeated estimation on simulated cross-sections",
        "validate": "IV test of predicted against observed price changes",
        "decompose": "aggregate pass-through split into cost and markup channels",
    }
    for name, text in descriptions.items():
        sub = subparsers.add_parser(name, help=text)
        sub.add_argument("--config", default=None, help="path to a JSON run config")
        sub.add_argument("--seed", type=int, default=None, help="override the config seed")
        sub.add_argument("--jobs", type=int, default=None, help="override worker count")
        sub.add_argument(
            "--out", default=None,
            help=f"output directory (default: config, then ${OUT_ENV_VAR})",
        )
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        seed = config.seed if args.seed is None else int(args.seed)
        jobs = config.jobs if args.jobs is None else int(args.jobs)
        if jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        out_dir = _resolve_out(args, config)
        runner = _SUBCOMMANDS[args.subcommand]
        outputs = runner(config, out_dir, seed, jobs)
        manifest = _write_manifest(out_dir, args.subcommand, config, seed, jobs, outputs)
        for name in [*sorted(outputs), manifest.name]:
            print(out_dir / name)
    except Exception as exc:  # noqa: BLE001
        code = exit_code_for(exc)
        if code is None:
            raise
        print(f"error: {exc}", file=sys.stderr)
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
