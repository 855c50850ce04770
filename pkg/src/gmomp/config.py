"""JSON run configurations, validated before any computation.

Paths inside a configuration are resolved relative to the configuration file.
Infinite sigma / tau are written as the string ``"inf"``.
"""

from __future__ import annotations

import json
from pathlib import Path

import jsonschema

from .dictionary import Dictionary, build_dictionary
from .io import decode_real, import_dictionary, read_points
from .spaces import FeasibleParams, MetricKind, PointSpace
from .solver import StopCriteria

_REAL = {"type": "number"}
_EXT_REAL = {"anyOf": [{"type": "number", "minimum": 0}, {"type": "string", "enum": ["inf", "Infinity"]}]}
_METRIC = {"type": "string", "enum": [m.value for m in MetricKind]}
_STD = {"anyOf": [{"type": "number", "exclusiveMinimum": 0}, {"type": "string", "pattern": r"^sqrt\(.*\)$"}]}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


DICTIONARY_SCHEMA = {"oneOf": [
    _obj({"kind": {"const": "gaussian"}, "T": {"type": "integer", "minimum": 1}, "std_dev": _STD},
         ["kind", "T", "std_dev"]),
    _obj({"kind": {"const": "gabor"}, "T": {"type": "integer", "minimum": 1}, "theta": _REAL,
          "phi": _REAL, "psi": _REAL, "dt": _REAL}, ["kind", "T", "theta", "phi", "psi", "dt"]),
    _obj({"kind": {"const": "bspline"}, "T": {"type": "integer", "minimum": 1},
          "max_order": {"type": "integer", "minimum": 1}, "metric": _METRIC},
         ["kind", "T", "max_order"]),
    _obj({"kind": {"const": "identity"}, "P": {"type": "integer", "minimum": 1}}, ["kind", "P"]),
    _obj({"kind": {"const": "csv"}, "path": {"type": "string"}, "params_path": {"type": "string"},
          "metric": _METRIC}, ["kind", "path"]),
]}

RUN_SCHEMA = _obj({
    "dictionary": DICTIONARY_SCHEMA,
    "data": {"type": "string"},
    "measurement_space": _obj({"path": {"type": "string"}, "metric": _METRIC}),
    "method": {"type": "string", "enum": ["gm-omp", "omp", "omp-vectorized", "somp"]},
    "lambda_norm": {"anyOf": [{"type": "number", "minimum": 1}, {"const": "inf"}]},
    "feasible": _obj({"sigma": _EXT_REAL, "tau": _EXT_REAL}, ["sigma", "tau"]),
    "stop": _obj({
        "max_iterations": {"type": ["integer", "null"], "minimum": 1},
        "residual_tol": {"type": "number", "minimum": 0},
        "correlation_floor": {"type": ["number", "null"], "minimum": 0},
        "beta": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
    }),
    "analysis": _obj({"L": {"type": "integer", "minimum": 1},
                      "lambda": {"type": "number", "exclusiveMinimum": 0, "maximum": 1}}, ["L"]),
    "solution": {"type": "string"},
    "postprocess": _obj({
        "pattern_degree": {"type": ["integer", "null"], "minimum": 0},
        "delta": {"type": "number", "minimum": 0},
        "amplitude_degree": {"type": ["integer", "null"], "minimum": 0},
    }),
    "output": {"type": "string"},
})

BENCH_SCHEMA = _obj({
    "experiment": _obj({
        "kind": {"type": "string", "enum": ["slope", "uniform", "bernoulli"]},
        "size": {"type": "integer", "minimum": 2},
        "values": {"type": "array", "items": _REAL},
        "trials": {"type": "integer", "minimum": 1},
        "base_seed": {"type": "integer"},
        "std_dev": _STD,
        "methods": {"type": "array", "items": {"type": "string",
                                               "enum": ["omp", "omp-vectorized", "somp", "gm-omp"]}},
        "sigma": _REAL, "tau": _REAL, "bernoulli_sigma": _REAL,
        "pattern_degree": {"type": "integer", "minimum": 0},
    }, ["kind"]),
    "output": {"type": "string"},
}, ["experiment"])


class ConfigError(Exception):
    """Unreadable or schema-invalid configuration."""


def load_config(path, schema=RUN_SCHEMA):
    path = Path(path)
    try:
        cfg = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    try:
        jsonschema.validate(cfg, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{path}: {where}: {exc.message}") from None
    return cfg


def resolve(base: Path, rel: str) -> Path:
    p = Path(rel)
    return p if p.is_absolute() else base / p


def make_dictionary(entry: dict, base: Path) -> Dictionary:
    entry = dict(entry)
    kind = entry.pop("kind")
    if kind == "csv":
        params = entry.get("params_path")
        return import_dictionary(resolve(base, entry["path"]),
                                 resolve(base, params) if params else None,
                                 entry.get("metric", MetricKind.ABSOLUTE_1D.value))
    return build_dictionary(kind, **entry)


def make_mspace(entry: dict | None, base: Path, n: int) -> PointSpace:
    if not entry or "path" not in entry:
        return PointSpace.line(n) if not entry or "metric" not in entry else \
            PointSpace(PointSpace.line(n).points, entry["metric"])
    return read_points(resolve(base, entry["path"]), entry.get("metric", MetricKind.ABSOLUTE_1D.value))


def make_params(entry: dict) -> FeasibleParams:
    return FeasibleParams(decode_real(entry["sigma"]), decode_real(entry["tau"]))


def make_stop(entry: dict | None) -> StopCriteria:
    entry = dict(entry or {})
    if "max_iterations" not in entry:
        entry["max_iterations"] = 1
    return StopCriteria(**entry)
