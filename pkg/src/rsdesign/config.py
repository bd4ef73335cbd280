"""JSON file formats for scenarios, experiment states, data files and reports.

Every file carries a ``schema_version``.  Validation errors name the
offending field as a dotted path such as ``model.zeta``.
"""

import json

import jsonschema
import numpy as np

from .designs import Criterion, Design, builtin_design, builtin_random_design, get_basis
from .error_models import ErrorModel

SCHEMA_VERSION = 1

_number_list = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_positive = {"type": "number", "exclusiveMinimum": 0}

MODEL_SCHEMA = {
    "type": "object",
    "required": ["family"],
    "properties": {
        "family": {"enum": ["gnd", "cauchy", "hetero_normal_gamma"]},
        "zeta": {"type": "number", "minimum": 2},
        "tau": _positive,
        "alpha": _positive,
        "beta": _positive,
    },
    "additionalProperties": False,
    "allOf": [
        {"if": {"properties": {"family": {"const": "gnd"}}},
         "then": {"required": ["zeta"]}},
        {"if": {"properties": {"family": {"const": "hetero_normal_gamma"}}},
         "then": {"required": ["alpha", "beta"]}},
    ],
}

DESIGN_SCHEMA = {
    "type": "object",
    "oneOf": [
        {
            "required": ["builtin", "n"],
            "properties": {
                "builtin": {"enum": ["balanced2", "factorial22", "g_optimal_quadratic"]},
                "n": {"type": "integer", "minimum": 1},
                "randomized": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        {
            "required": ["support", "weights", "n"],
            "properties": {
                "support": {"type": "array", "minItems": 1,
                            "items": {"type": "array", "items": {"type": "number"}}},
                "weights": _number_list,
                "n": {"type": "integer", "minimum": 1},
                "basis": {"type": "string"},
                "domain": {"type": "array"},
            },
            "additionalProperties": False,
        },
    ],
}

CRITERION_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["D", "A", "G"]},
        "g_grid": {"type": "integer", "minimum": 2},
    },
    "additionalProperties": False,
}

_strategy = {"enum": ["Fixed", "RRSD", "DRSD"]}

SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["model", "design", "strategy", "theta_true"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "model": MODEL_SCHEMA,
        "design": DESIGN_SCHEMA,
        "strategy": {"oneOf": [_strategy, {"type": "array", "items": _strategy, "minItems": 1}]},
        "theta_true": _number_list,
        "n1": {"type": "integer", "minimum": 1},
        "first_run": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "iterations": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "contrast": _number_list,
        "criterion": CRITERION_SCHEMA,
        "sweep_n": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
    },
    "additionalProperties": False,
}

EXPERIMENT_SCHEMA = {
    "type": "object",
    "required": ["model", "design", "mode", "n1"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "model": MODEL_SCHEMA,
        "design": DESIGN_SCHEMA,
        "mode": {"enum": ["RRSD", "DRSD"]},
        "n1": {"type": "integer", "minimum": 1},
        "first_run": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "seed": {"type": "integer", "minimum": 0},
    },
    "additionalProperties": False,
}

_plan = {
    "type": ["object", "null"],
    "required": ["size"],
    "properties": {
        "size": {"type": "integer", "minimum": 1},
        "probs": _number_list,
        "chosen_index": {"type": "integer", "minimum": 0},
        "capped": {"type": "boolean"},
        "allocations": {"type": "array", "items": {"type": "integer", "minimum": 0}},
    },
}

STATE_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "design", "model", "mode", "n1", "run_index",
                 "support_index", "responses", "pending", "digest"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "design": {"type": "object"},
        "model": MODEL_SCHEMA,
        "mode": {"enum": ["RRSD", "DRSD"]},
        "n1": {"type": "integer"},
        "seed": {"type": "integer"},
        "run_index": {"type": "integer", "minimum": 0},
        "support_index": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "responses": {"type": "array", "items": {"type": "number"}},
        "precisions": {"type": "array", "items": {"type": "number"}},
        "capped": {"type": "boolean"},
        "pending": _plan,
        "derived": {"type": "object"},
        "digest": {"type": "string"},
    },
}

RESPONSES_SCHEMA = {
    "type": "object",
    "required": ["responses"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "responses": _number_list,
        "precisions": _number_list,
    },
    "additionalProperties": False,
}

DATA_SCHEMA = {
    "type": "object",
    "required": ["groups"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "weights": _number_list,
        "groups": {
            "type": "array", "minItems": 1,
            "items": {
                "type": "object",
                "required": ["responses"],
                "properties": {"responses": _number_list, "precisions": _number_list},
                "additionalProperties": False,
            },
        },
    },
    "additionalProperties": False,
}

REPORT_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "reports"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "reports": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["schema_version", "scenario", "R_effective", "mean_Hinv",
                             "var_mle", "crlb", "lb_eff", "var_eff"],
                "properties": {"lb_eff": {"type": ["number", "null"]},
                               "var_eff": {"type": ["number", "null"]},
                               "R_effective": {"type": "integer", "minimum": 1}},
            },
        },
    },
}

INFO_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "model", "mu", "gamma", "gamma_alt", "nu"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "mu": {"type": "number"},
        "gamma": {"type": ["number", "null"]},
        "gamma_alt": {"type": "number"},
        "nu": {"type": "object"},
        "groups": {"type": "array"},
    },
}

SERIES_COLUMNS = ("n", "strategy", "metric", "value", "mc_se")


class ConfigError(ValueError):
    """A file failed validation; ``path`` is the dotted location of the problem."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


def validate(document, schema):
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(document), key=lambda e: list(e.absolute_path))
    if errors:
        # report the deepest error of the first failing location
        err = jsonschema.exceptions.best_match(errors)
        path = ".".join(str(p) for p in err.absolute_path)
        raise ConfigError(err.message, path or "<root>")
    return document


def load_json(path, schema):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"not valid JSON ({exc})", str(path)) from exc
    return validate(doc, schema)


def dump_json(document, path=None):
    """Deterministic JSON text (sorted keys, LF endings)."""
    text = json.dumps(document, sort_keys=True, indent=2) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text


def build_design(spec, n=None):
    """A ``Design`` or ``RandomDesign`` from a design block, optionally at another ``n``."""
    if "builtin" in spec:
        size = spec["n"] if n is None else n
        if spec.get("randomized"):
            return builtin_random_design(spec["builtin"], size)
        return builtin_design(spec["builtin"], size)
    spec = dict(spec)
    if n is not None:
        spec["n"] = n
    return Design.from_dict(spec)


def build_model(spec):
    return ErrorModel.from_dict(spec)


def build_criterion(spec):
    if spec is None:
        return None
    return Criterion(spec["kind"], spec.get("g_grid", 1001))


def as_array(values):
    return None if values is None else np.asarray(values, dtype=float)


__all__ = [
    "SCHEMA_VERSION", "SCENARIO_SCHEMA", "EXPERIMENT_SCHEMA", "STATE_SCHEMA",
    "RESPONSES_SCHEMA", "DATA_SCHEMA", "REPORT_SCHEMA", "INFO_SCHEMA", "MODEL_SCHEMA",
    "ConfigError", "validate", "load_json", "dump_json", "build_design", "build_model",
    "build_criterion", "get_basis",
]
