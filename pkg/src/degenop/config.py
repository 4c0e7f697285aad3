"""Run configuration: schema-checked parsing of YAML or JSON files.

Complex numbers are written as ``[re, im]`` pairs; plain numbers are also
accepted where a complex value is expected.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import yaml

from .errors import SchemaError

KINDS = ("elliptic", "resolvent-scan", "parabolic", "nonlinear", "pollutant-demo")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int2 = {"type": "integer", "minimum": 2}
_complex = {"oneOf": [_num, {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}]}
_matrix = {"type": "array", "items": {"type": "array", "items": _complex}}
_coef = {"anyOf": [_complex, _matrix]}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


_axis_bc = _obj({
    "m": {"type": "array", "items": {"enum": [0, 1]}, "minItems": 2, "maxItems": 2},
    "alpha_coeffs": {"type": "array", "items": {"type": "array", "items": _complex}, "minItems": 2, "maxItems": 2},
    "beta_coeffs": {"type": "array", "items": {"type": "array", "items": _complex}, "minItems": 2, "maxItems": 2},
}, ["m", "alpha_coeffs", "beta_coeffs"])
_bc = {"anyOf": [{"enum": ["dirichlet", "neumann", "periodic"]},
                 {"type": "array", "items": _axis_bc, "minItems": 1, "maxItems": 3}]}
_grid = _obj({
    "alpha": {"type": "array", "items": _num, "minItems": 1, "maxItems": 3},
    "lengths": {"type": "array", "items": _pos, "minItems": 1, "maxItems": 3},
    "n_cells": {"type": "array", "items": _int2, "minItems": 1, "maxItems": 3},
}, ["alpha", "n_cells"])
_norm = _obj({"p": {"type": "number", "minimum": 1}, "p0": {"type": "number", "minimum": 1}})
_sector = _obj({
    "phi": _pos,
    "decades": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
    "moduli": {"type": "array", "items": _pos, "minItems": 1},
    "n_rays": {"type": "integer", "minimum": 1},
    "include_zero": {"type": "boolean"},
})
_forcing = _obj({
    "type": {"enum": ["manufactured", "constant", "random"]},
    "value": _complex,
    "seed": {"type": "integer", "minimum": 0},
}, ["type"])
_time = _obj({
    "T": _pos, "steps": {"type": "integer", "minimum": 1},
    "scheme": {"enum": ["implicit-euler", "crank-nicolson"]},
    "d": {"type": "number", "minimum": 0},
    "save": {"anyOf": [{"enum": ["final", "all"]},
                       {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1}]},
})
_nl = _obj({
    "r": _pos, "tol": {"type": "number", "minimum": 1e-12},
    "max_outer": {"type": "integer", "minimum": 1},
    "max_shrinks": {"type": "integer", "minimum": 0},
})
_common = {
    "kind": {"enum": list(KINDS)},
    "seed": {"type": "integer", "minimum": 0},
    "grid": _grid,
    "bc": _bc,
    "norm": _norm,
}
_linear = dict(_common, **{
    "m": {"type": "integer", "minimum": 1},
    "coefficients": _obj({"a": {"anyOf": [_num, {"type": "array", "items": _complex}]}, "A": _coef}),
    "first_order": {"type": "array", "items": _coef},
    "lambda": _complex,
    "forcing": _forcing,
    "sector": _sector,
    "scan": _obj({"trials": {"type": "integer", "minimum": 0}}),
    "time": _time,
})
_model = _obj({
    "type": {"enum": ["toy-quadratic"]},
    "eps": _num, "a0": _num, "source": _num, "a": _num,
    "m": {"type": "integer", "minimum": 1},
}, ["type"])
_species_val = {"anyOf": [_num, {"type": "array", "items": {"anyOf": [_num, {"type": "array", "items": _num}]}}]}
_gaussian = _obj({"amplitude": _num, "center": {"type": "array", "items": _num}, "width": _pos}, ["center"])

SCHEMAS = {
    "elliptic": _obj(_linear, ["kind", "grid", "bc"]),
    "resolvent-scan": _obj(_linear, ["kind", "grid", "bc"]),
    "parabolic": _obj(_linear, ["kind", "grid", "bc", "time"]),
    "nonlinear": _obj(dict(_common, model=_model, time=_time, nonlinear=_nl),
                      ["kind", "grid", "bc", "model"]),
    "pollutant-demo": _obj({
        "kind": {"enum": list(KINDS)},
        "seed": {"type": "integer", "minimum": 0},
        "species": {"type": "integer", "minimum": 1},
        "grid": _obj({"n_cells": {"type": "array", "items": _int2, "minItems": 1, "maxItems": 3},
                      "lengths": {"type": "array", "items": _pos, "minItems": 1, "maxItems": 3}},
                     ["n_cells"]),
        "alpha": {"anyOf": [_num, {"type": "array", "items": _num, "minItems": 1, "maxItems": 3}]},
        "diffusion": _species_val,
        "advection_scale": _species_val,
        "wind": {"anyOf": [_num, {"type": "array", "items": _num, "minItems": 1, "maxItems": 3}]},
        "coupling_d": {"anyOf": [_num, {"type": "array", "items": _num}]},
        "reactions": _obj({"type": {"enum": ["none", "chapman", "exchange"]},
                           "rates": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}},
                          ["type"]),
        "sources": {"anyOf": [_num, {"type": "array", "items": {"anyOf": [_num, _gaussian]}}]},
        "bc": _bc,
        "time": _time,
        "nonlinear": _nl,
    }, ["kind", "species", "grid"]),
}


@dataclass
class RunConfig:
    """A validated configuration; ``data`` is the parsed tree including ``kind``."""

    kind: str
    data: dict = field(default_factory=dict)

    def get(self, key, default=None):
        return self.data.get(key, default)

    def __getitem__(self, key):
        return self.data[key]

    def canonical(self) -> str:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))


def _path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def _schema_errors(data: dict, schema: dict) -> list:
    errs = []
    for e in sorted(jsonschema.Draft202012Validator(schema).iter_errors(data), key=lambda e: list(e.path)):
        if e.validator == "additionalProperties":
            extra = sorted(set(e.instance) - set(e.schema.get("properties", {})))
            for key in extra:
                errs.append((_path(list(e.path) + [key]), f"unknown key {key!r}"))
        else:
            errs.append((_path(e.path), e.message))
    return errs


def _check_alpha(values, path, errs):
    for i, a in enumerate(values):
        if not a < 1:
            errs.append((f"{path}[{i}]", "alpha must be < 1"))
        elif a < 0:
            errs.append((f"{path}[{i}]", "alpha must be >= 0"))


def _semantic_errors(data: dict) -> list:
    errs = []
    kind = data["kind"]
    grid = data.get("grid", {})
    if kind == "pollutant-demo":
        n = len(grid.get("n_cells", []))
        alpha = data.get("alpha", 0.0)
        _check_alpha(alpha if isinstance(alpha, list) else [alpha], "alpha", errs)
        diff = data.get("diffusion", 1.0)
        flat = diff if isinstance(diff, list) else [diff]
        flat = [v for item in flat for v in (item if isinstance(item, list) else [item])]
        if any(v <= 0 for v in flat):
            errs.append(("diffusion", "diffusion must be > 0 (physical convention)"))
        if data.get("reactions", {}).get("type", "none") != "none" and data.get("species") != 3:
            errs.append(("species", "the bundled reactions need species = 3"))
        src = data.get("sources")
        if isinstance(src, list) and len(src) != data.get("species"):
            errs.append(("sources", "need one source per species"))
    else:
        n = len(grid.get("n_cells", []))
        _check_alpha(grid.get("alpha", []), "grid.alpha", errs)
        for key in ("alpha", "lengths"):
            if key in grid and len(grid[key]) != n:
                errs.append((f"grid.{key}", f"expected {n} entries, one per axis"))
    a = data.get("coefficients", {}).get("a")
    if isinstance(a, list) and len(a) != n:
        errs.append(("coefficients.a", f"expected {n} entries, one per axis"))
    bc = data.get("bc")
    if isinstance(bc, list) and len(bc) != n:
        errs.append(("bc", f"expected {n} axis conditions"))
    save = data.get("time", {}).get("save")
    steps = data.get("time", {}).get("steps", 20 if kind in ("nonlinear", "pollutant-demo") else 10)
    if isinstance(save, list) and max(save) > steps:
        errs.append(("time.save", f"step indices must be <= steps ({steps})"))
    sector = data.get("sector", {})
    if "phi" in sector and not sector["phi"] < math.pi:
        errs.append(("sector.phi", "phi must be < pi"))
    norm = data.get("norm", {})
    for key in ("p", "p0"):
        if key in norm and not math.isfinite(norm[key]):
            errs.append((f"norm.{key}", f"{key} must be finite"))
    return errs


def load_config(data) -> RunConfig:
    """Validate an already-parsed tree."""
    if not isinstance(data, dict):
        raise SchemaError([("<root>", "config must be a mapping")])
    kind = data.get("kind")
    if kind not in SCHEMAS:
        raise SchemaError([("kind", f"kind must be one of {list(KINDS)}, got {kind!r}")])
    errs = _schema_errors(data, SCHEMAS[kind])
    if not errs:
        errs = _semantic_errors(data)
    if errs:
        raise SchemaError(errs)
    return RunConfig(kind, data)


def parse_text(text: str) -> RunConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SchemaError([("<root>", f"unparseable config: {exc}")]) from exc
    return load_config(data)


def parse_config(path) -> RunConfig:
    """Read and validate a YAML or JSON config file."""
    return parse_text(Path(path).read_text())


def serialize(config: RunConfig) -> str:
    """YAML text that :func:`parse_text` maps back to an equal config."""
    return yaml.safe_dump(config.data, sort_keys=True)
