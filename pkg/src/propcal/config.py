"""TOML configuration loading.

Grammar (nested sections, key = value):

    [model]
    kind = "sequence"            # sequence | kernel | functional
    label = "free text"
    sigma = [1.0, 1.0, 1.0]      # any numeric vector may instead be a CSV
    mu = { csv = "mu.csv", column = "mu" }   # reference, relative to config
    delta = 1e-4
    cutoffs = [3, 2, 1]

    # kind = "kernel": design_points, point, bandwidths (increasing),
    #   kernel = "rectangular" | "triangular" | "epanechnikov" | "gaussian",
    #   noise_sd, f_values, target (optional)
    # kind = "functional": phi (list of K rows), noise_cov_diag, target_coeffs

    [calibration]
    r = 0.5
    alpha = 1.0
    n_replications = 50000
    seed = 20240101
    bisection_tol = 1e-3
    precompute_tables = true
    # max_bracket = 100.0
    # workers = 4

    [experiment]
    model_family = "example1"    # example1 | example2 | custom (uses [model])
    n = 50
    num_models = 10
    num_runs = 500
    deltas = [1e-4, 1e-5, 1e-6]
    oracle_budget = 1.0
    oracle_strict = true
    model_seed = 101
    run_seed = 202
"""

from __future__ import annotations

import os

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .bench import ExperimentSpec
from .calibrate import CalibrationConfig
from .errors import DomainError
from .family import FunctionalModelSpec, KernelModelSpec, SequenceModelSpec
from .report import read_csv_column


def load_config(path: str) -> dict:
    with open(path, "rb") as f:
        return tomllib.load(f)


def resolve_vector(value, base_dir: str) -> np.ndarray:
    """Inline list -> array; {csv = path, column = name} -> CSV column."""
    if isinstance(value, dict):
        try:
            path, column = value["csv"], value["column"]
        except KeyError as exc:
            raise DomainError(f"CSV vector reference needs 'csv' and 'column': {value}") from None
        return read_csv_column(os.path.join(base_dir, path), column)
    return np.asarray(value, dtype=float)


def model_spec_from_config(cfg: dict, base_dir: str = "."):
    """Build a model spec from the [model] section."""
    try:
        section = cfg["model"]
    except KeyError:
        raise DomainError("config has no [model] section") from None
    kind = section.get("kind", "sequence")
    label = section.get("label", kind)
    vec = lambda key: resolve_vector(section[key], base_dir)  # noqa: E731
    try:
        if kind == "sequence":
            return SequenceModelSpec(
                sigma=vec("sigma"),
                mu=vec("mu"),
                delta=float(section["delta"]),
                cutoffs=np.asarray(section["cutoffs"], dtype=int),
                label=label,
            )
        if kind == "kernel":
            return KernelModelSpec(
                design_points=vec("design_points"),
                point=float(section["point"]),
                bandwidths=vec("bandwidths"),
                kernel=section.get("kernel", "rectangular"),
                noise_sd=float(section["noise_sd"]),
                f_values=vec("f_values"),
                target=float(section["target"]) if "target" in section else None,
                label=label,
            )
        if kind == "functional":
            return FunctionalModelSpec(
                phi=np.asarray(section["phi"], dtype=float),
                noise_cov_diag=vec("noise_cov_diag"),
                target_coeffs=vec("target_coeffs"),
                label=label,
            )
    except KeyError as exc:
        raise DomainError(f"[model] section is missing key {exc}") from None
    raise DomainError(f"unknown model kind {kind!r}")


def calibration_from_config(cfg: dict) -> CalibrationConfig:
    section = dict(cfg.get("calibration", {}))
    known = {
        "r",
        "alpha",
        "n_replications",
        "seed",
        "bisection_tol",
        "max_bracket",
        "precompute_tables",
        "workers",
    }
    unknown = set(section) - known
    if unknown:
        raise DomainError(f"unknown [calibration] keys: {sorted(unknown)}")
    return CalibrationConfig(**section)


def experiment_from_config(cfg: dict, base_dir: str = ".") -> ExperimentSpec:
    section = dict(cfg.get("experiment", {}))
    known = {
        "model_family",
        "n",
        "num_models",
        "num_runs",
        "deltas",
        "oracle_budget",
        "oracle_strict",
        "model_seed",
        "run_seed",
    }
    unknown = set(section) - known
    if unknown:
        raise DomainError(f"unknown [experiment] keys: {sorted(unknown)}")
    if "deltas" in section:
        section["deltas"] = tuple(float(d) for d in section["deltas"])
    custom = None
    if section.get("model_family") == "custom":
        custom = model_spec_from_config(cfg, base_dir)
        if not isinstance(custom, SequenceModelSpec):
            raise DomainError("custom experiments need a sequence [model] section")
    return ExperimentSpec(calib=calibration_from_config(cfg), custom=custom, **section)
