"""Run configuration: one JSON file per run with a versioned schema.

Every subcommand reads the same document; missing keys fall back to
defaults that mirror the baseline parameter estimates and the heatmap
figure's stated calibration, so a bare invocation works end to end.
Unknown keys fail loudly with their dotted path.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .pricing import CalibratedParams, StructuralParams

__all__ = [
    "SCHEMA",
    "RunConfig",
    "default_config",
    "load_config",
    "config_hash",
    "structural_params",
    "calibrated_params",
]

SCHEMA = "tradebargain-run/1"

_CALIBRATION = {"nu": 4.0, "gamma": 0.5, "rho": 10.0, "varrho": 1.0}
_BARGAINING = {"phi": 0.827, "theta": 0.454}


def default_config() -> dict:
    """Complete config document with every block at its defaults."""
    return {
        "schema": SCHEMA,
        "seed": 0,
        "jobs": 1,
        "out": None,
        "heatmap": {
            "resolution": 101,
            "theta_low": 0.5,
            "phi_interior": 0.5,
            "phi_low": 1e-6,
            "phi_high": 1.0 - 1e-6,
            "calibration": dict(_CALIBRATION),
        },
        "simulate": {
            "n_products": 20,
            "exporters_per_product": 3,
            "importers_per_product": 4,
            "importer_pool": None,
            "n_years": 3,
            "first_year": 2015,
            "n_countries": 5,
            "sigma_cost": 0.1,
            "base_cost_sigma": 0.25,
            "importer_size_sigma": 0.5,
            "tariff_treat_prob": 0.3,
            "tariff_low": 0.10,
            "tariff_high": 0.40,
            "bargaining": dict(_BARGAINING),
            "calibration": dict(_CALIBRATION),
        },
        "estimate": {
            "transactions": None,
            "estimator": "nls",
            "parameterization": "direct",
            "n_starts": 8,
            "calibration": dict(_CALIBRATION),
        },
        "montecarlo": {
            "n_exporters": 200,
            "importers_per_exporter": 2,
            "n_replicas": 501,
            "share_law": "uniform",
            "estimator": "joint",
            "n_starts": 8,
            "bins": 30,
            "truth": dict(_BARGAINING),
            "calibration": dict(_CALIBRATION),
        },
        "validate": {
            "transactions": None,
            "fe": ["product"],
            "clusters": ["product", "country"],
            "bargaining": dict(_BARGAINING),
            "calibration": dict(_CALIBRATION),
        },
        "decompose": {
            "transactions": None,
            "bargaining": dict(_BARGAINING),
            "calibration": dict(_CALIBRATION),
        },
    }


@dataclass(frozen=True)
class RunConfig:
    """Merged run document plus the canonical dict it hashes to."""

    seed: int
    jobs: int
    out: str | None
    heatmap: dict = field(default_factory=dict)
    simulate: dict = field(default_factory=dict)
    estimate: dict = field(default_factory=dict)
    montecarlo: dict = field(default_factory=dict)
    validate: dict = field(default_factory=dict)
    decompose: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)


def _merge(base: dict, override: dict, path: str = "") -> dict:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        dotted = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"config key {dotted!r} is not recognized")
        if isinstance(base[key], dict) and value is not None:
            if not isinstance(value, dict):
                raise ConfigError(f"config key {dotted!r} must be a table")
            merged[key] = _merge(base[key], value, path=f"{dotted}.")
        else:
            merged[key] = value
    return merged


def load_config(path=None) -> RunConfig:
    """Load a JSON run config, filling defaults; None loads pure defaults."""
    document = default_config()
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            user = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
        schema = user.get("schema", SCHEMA)
        if schema != SCHEMA:
            raise ConfigError(f"config schema {schema!r} is not {SCHEMA!r}")
        document = _merge(document, user)

    if not isinstance(document["seed"], int):
        raise ConfigError("seed must be an integer")
    if not isinstance(document["jobs"], int) or document["jobs"] < 1:
        raise ConfigError("jobs must be a positive integer")

    return RunConfig(
        seed=document["seed"],
        jobs=document["jobs"],
        out=document["out"],
        heatmap=document["heatmap"],
        simulate=document["simulate"],
        estimate=document["estimate"],
        montecarlo=document["montecarlo"],
        validate=document["validate"],
        decompose=document["decompose"],
        raw=document,
    )


def config_hash(config: RunConfig) -> str:
    canonical = json.dumps(config.raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def structural_params(block: dict) -> StructuralParams:
    try:
        return StructuralParams(phi=float(block["phi"]), theta=float(block["theta"]))
    except KeyError as exc:
        raise ConfigError(f"bargaining block missing key {exc}") from exc


def calibrated_params(block: dict) -> CalibratedParams:
    try:
        return CalibratedParams(
            nu=float(block["nu"]),
            gamma=float(block["gamma"]),
            rho=float(block["rho"]),
            varrho=float(block.get("varrho", 1.0)),
        )
    except KeyError as exc:
        raise ConfigError(f"calibration block missing key {exc}") from exc
