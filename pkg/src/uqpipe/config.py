"""Pipeline configuration: defaults, JSON schema, validation.

A user config file only needs the keys it overrides; it is validated
against the published schema (unknown keys rejected), deep-merged over
the defaults, and the merged document is validated once more.  All
randomness downstream flows from the seeds recorded here.
"""

from __future__ import annotations

import copy
import json
import os
from pathlib import Path

from .errors import ConfigError
from .simulators import PARAMETER_BOUNDS, PARAMETER_NAMES

WORKDIR_ENV = "UQ_WORKDIR"

DEFAULTS: dict = {
    "workdir": "uq_run",
    "parameters": {
        "names": list(PARAMETER_NAMES),
        "bounds": [list(b) for b in PARAMETER_BOUNDS],
    },
    "design": {
        "count": 2048,
        "chunks": [1024, 1024],
        "seed": 20130528,
    },
    "simulate": {
        "n_steps": 600,
        "dt_seconds": 120.0,
    },
    "pca": {
        "target_fraction": 0.99,
    },
    "pce": {
        "degree_range": [1, 10],
        "candidate_cap": 1000000,
        "loo_correction": False,
        "path_patience": 50,
    },
    "sobol": {
        "inputs": "all",
        "time_variant": True,
    },
    "calibration": {
        "error_model": "discrepancy",
        "discrepancy_degree": 5,
        "sigma_prior": [0.0, 100.0],
        "tau_prior": [0.0, 12000.0],
        "b_prior_scale": 10.0,
        "iterations": 1000000,
        "chains": 30,
        "seed": 424242,
        "burn_in_fraction": 0.2,
        "thin": None,
        "proposal_scale_fraction": 0.1,
        "adapt_iterations": 0,
        "map_starts": 4,
        "data": "synthetic",
        "synthetic_truth": {
            "x": [0.9, 1.1, 0.8, 1.2, 0.7, 1.3, 1.0, 1.2],
            "sigma": 20.0,
            "rho": 0.3,
            "b": [15.0, -10.0, 6.0],
            "seed": 7,
        },
    },
    "paths": {
        "design": "design.csv",
        "forcing": "forcing.csv",
        "outputs": "outputs.csv",
        "scores": "scores.csv",
        "surrogate": "surrogate.json",
        "loo": "loo.csv",
        "predictions": "predictions.csv",
        "accuracy": "accuracy.csv",
        "sobol_components": "sobol_z.csv",
        "sobol_timevariant": "sobol_t.csv",
        "data": "data.csv",
        "chains_meta": "chains.json",
        "chains_bin": "chains.bin",
        "map": "map.json",
        "map_discrepancy": "map_discrepancy.csv",
        "map_prediction": "map_prediction.csv",
        "summary": "summary.csv",
        "kde": "kde.csv",
    },
}

_NUMBER = {"type": "number"}
_BOUNDS = {
    "type": "array",
    "items": {"type": "array", "items": _NUMBER,
              "minItems": 2, "maxItems": 2},
    "minItems": 1,
}

SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "workdir": {"type": "string"},
        "parameters": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "names": {"type": "array", "items": {"type": "string"}},
                "bounds": _BOUNDS,
            },
        },
        "design": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "count": {"type": "integer", "minimum": 1},
                "chunks": {"type": "array",
                           "items": {"type": "integer", "minimum": 1}},
                "seed": {"type": "integer"},
            },
        },
        "simulate": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_steps": {"type": "integer", "minimum": 1},
                "dt_seconds": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "pca": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "target_fraction": {"type": "number",
                                    "exclusiveMinimum": 0, "maximum": 1},
            },
        },
        "pce": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "degree_range": {"type": "array", "items":
                                 {"type": "integer", "minimum": 0},
                                 "minItems": 2, "maxItems": 2},
                "candidate_cap": {"type": "integer", "minimum": 1},
                "loo_correction": {"type": "boolean"},
                "path_patience": {"type": ["integer", "null"], "minimum": 1},
            },
        },
        "sobol": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "inputs": {"anyOf": [
                    {"type": "string", "enum": ["all"]},
                    {"type": "array", "items": {"type": "string"}},
                ]},
                "time_variant": {"type": "boolean"},
            },
        },
        "calibration": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "error_model": {"type": "string",
                                "enum": ["iid", "discrepancy"]},
                "discrepancy_degree": {"type": "integer", "minimum": 0},
                "sigma_prior": {"type": "array", "items": _NUMBER,
                                "minItems": 2, "maxItems": 2},
                "tau_prior": {"type": "array", "items": _NUMBER,
                              "minItems": 2, "maxItems": 2},
                "b_prior_scale": {"type": "number", "exclusiveMinimum": 0},
                "iterations": {"type": "integer", "minimum": 1},
                "chains": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer"},
                "burn_in_fraction": {"type": "number", "minimum": 0,
                                     "exclusiveMaximum": 1},
                "thin": {"type": ["integer", "null"], "minimum": 1},
                "proposal_scale_fraction": {"type": "number",
                                            "exclusiveMinimum": 0},
                "adapt_iterations": {"type": "integer", "minimum": 0},
                "map_starts": {"type": "integer", "minimum": 1},
                "data": {"type": "string"},
                "synthetic_truth": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "x": {"type": "array", "items": _NUMBER},
                        "sigma": {"type": "number", "exclusiveMinimum": 0},
                        "rho": {"type": "number", "minimum": 0,
                                "exclusiveMaximum": 1},
                        "b": {"type": "array", "items": _NUMBER},
                        "seed": {"type": "integer"},
                    },
                },
            },
        },
        "paths": {
            "type": "object",
            "additionalProperties": False,
            "properties": {key: {"type": "string"}
                           for key in DEFAULTS["paths"]},
        },
    },
}


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def validate(document: dict) -> None:
    import jsonschema

    try:
        jsonschema.validate(document, SCHEMA)
    except jsonschema.ValidationError as exc:
        location = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {location}: {exc.message}") \
            from exc


def _check_consistency(cfg: dict) -> None:
    names = cfg["parameters"]["names"]
    bounds = cfg["parameters"]["bounds"]
    if len(names) != len(bounds):
        raise ConfigError("parameters: names and bounds lengths differ")
    for lo, hi in bounds:
        if not lo < hi:
            raise ConfigError(f"parameters: degenerate bounds [{lo}, {hi}]")
    if sum(cfg["design"]["chunks"]) != cfg["design"]["count"]:
        raise ConfigError("design: chunks must sum to count")
    lo_d, hi_d = cfg["pce"]["degree_range"]
    if lo_d > hi_d:
        raise ConfigError("pce: degree range is empty")
    truth = cfg["calibration"]["synthetic_truth"]
    if len(truth["x"]) != len(names):
        raise ConfigError("calibration: synthetic truth x length mismatch")


def load(path) -> dict:
    """Read, validate and merge a config file over the defaults.

    The environment variable UQ_WORKDIR overrides the workdir.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        user = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: "
                          f"{exc.msg}") from exc
    if not isinstance(user, dict):
        raise ConfigError(f"{path}: top level must be an object")
    validate(user)
    merged = _deep_merge(DEFAULTS, user)
    validate(merged)
    env_workdir = os.environ.get(WORKDIR_ENV)
    if env_workdir:
        merged["workdir"] = env_workdir
    _check_consistency(merged)
    return merged
