"""JSON instance files, price files and CSV tables.

Instance document::

    {"m": 3,
     "agents": [[{"p": 0.5, "valuation": {"kind": "additive", "weights": [1, 2, 0]}},
                 {"p": 0.5, "valuation": {"kind": "unit_demand", "weights": [2, 2, 2]}}]],
     "order": [0]}

Valuation objects by ``kind``:

=============  ==============================================================
additive       ``weights``: list of m reals
unit_demand    ``weights``: list of m reals
xos            ``clauses``: list of lists of m reals
table          ``values``: list of 2^m reals indexed by bitmask (optional ``m``)
set_cover_gap  ``k``: int in 1..4 (m = 2^k - 1)
stacked        ``L``: int in 0..2 (m = 2^(2^L))
scaled_sum     ``terms``: list of ``{"weight": real, "valuation": {...}}``
=============  ==============================================================
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import jsonschema
import numpy as np

from .errors import InputError
from .lowerbound import GapFunction, StackedValuation
from .prices import PriceVector
from .valuations import (XOS, Additive, Instance, ScaledSum, Table, UnitDemand, Valuation,
                         ValuationDistribution)

_REAL = {"type": "number"}
_REALS = {"type": "array", "items": _REAL}

VALUATION_SCHEMA: dict = {
    "type": "object",
    "required": ["kind"],
    "properties": {"kind": {"enum": ["additive", "unit_demand", "xos", "table",
                                     "set_cover_gap", "stacked", "scaled_sum"]}},
    "allOf": [
        {"if": {"properties": {"kind": {"enum": ["additive", "unit_demand"]}}},
         "then": {"required": ["weights"], "properties": {"weights": _REALS}}},
        {"if": {"properties": {"kind": {"const": "xos"}}},
         "then": {"required": ["clauses"],
                  "properties": {"clauses": {"type": "array", "minItems": 1, "items": _REALS}}}},
        {"if": {"properties": {"kind": {"const": "table"}}},
         "then": {"required": ["values"],
                  "properties": {"values": _REALS, "m": {"type": "integer"}}}},
        {"if": {"properties": {"kind": {"const": "set_cover_gap"}}},
         "then": {"required": ["k"], "properties": {"k": {"type": "integer"}}}},
        {"if": {"properties": {"kind": {"const": "stacked"}}},
         "then": {"required": ["L"], "properties": {"L": {"type": "integer"}}}},
        {"if": {"properties": {"kind": {"const": "scaled_sum"}}},
         "then": {"required": ["terms"],
                  "properties": {"terms": {"type": "array", "minItems": 1, "items": {
                      "type": "object", "required": ["weight", "valuation"],
                      "properties": {"weight": _REAL, "valuation": {"$ref": "#"}}}}}}},
    ],
}

INSTANCE_SCHEMA: dict = {
    "type": "object",
    "required": ["m", "agents"],
    "properties": {
        "m": {"type": "integer", "minimum": 0},
        "agents": {"type": "array", "minItems": 1, "items": {
            "type": "array", "minItems": 1, "items": {
                "type": "object", "required": ["p", "valuation"],
                "properties": {"p": _REAL, "valuation": {"type": "object"}}}}},
        "order": {"type": "array", "items": {"type": "integer"}},
    },
}


def _validate(doc: Any, schema: dict, what: str) -> None:
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        path = "/".join(map(str, exc.absolute_path))
        raise InputError(f"invalid {what} at '{path}': {exc.message}") from None


def valuation_from_dict(doc: dict) -> Valuation:
    _validate(doc, VALUATION_SCHEMA, "valuation")
    kind = doc["kind"]
    if kind == "additive":
        return Additive(doc["weights"])
    if kind == "unit_demand":
        return UnitDemand(doc["weights"])
    if kind == "xos":
        widths = {len(c) for c in doc["clauses"]}
        if len(widths) != 1:
            raise InputError("xos clauses have different lengths")
        return XOS(doc["clauses"])
    if kind == "table":
        vals = doc["values"]
        m = doc.get("m", max(len(vals), 1).bit_length() - 1)
        return Table(vals, m)
    if kind == "set_cover_gap":
        return GapFunction(doc["k"])
    if kind == "stacked":
        return StackedValuation(doc["L"])
    return ScaledSum([(t["weight"], valuation_from_dict(t["valuation"])) for t in doc["terms"]])


def valuation_to_dict(v: Valuation) -> dict:
    return v.to_dict()


def instance_from_dict(doc: dict) -> Instance:
    _validate(doc, INSTANCE_SCHEMA, "instance")
    m = doc["m"]
    agents = []
    for i, support in enumerate(doc["agents"]):
        vals = [(atom["p"], valuation_from_dict(atom["valuation"])) for atom in support]
        for _, v in vals:
            if v.m != m:
                raise InputError(f"agent {i}: valuation over {v.m} items in an instance with m={m}")
        agents.append(ValuationDistribution(vals))
    return Instance(m, agents, doc.get("order"))


def instance_to_dict(inst: Instance) -> dict:
    doc: dict = {"m": inst.m,
                 "agents": [[{"p": float(p), "valuation": v.to_dict()} for p, v in D]
                            for D in inst.agents]}
    if inst.order is not None:
        doc["order"] = list(inst.order)
    return doc


def _read_json(path: str | Path) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise InputError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None


def dump_json(doc: Any, path: str | Path | None = None) -> str:
    text = json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def load_instance(path: str | Path) -> Instance:
    return instance_from_dict(_read_json(path))


def save_instance(inst: Instance, path: str | Path | None = None) -> str:
    return dump_json(instance_to_dict(inst), path)


def load_prices(path: str | Path, m: int | None = None) -> PriceVector:
    doc = _read_json(path)
    values = doc.get("prices") if isinstance(doc, dict) else doc
    if not isinstance(values, list):
        raise InputError(f"{path}: expected a list of prices or {{'prices': [...]}}")
    pv = PriceVector.from_list(values)
    if m is not None and pv.m != m:
        raise InputError(f"{path}: {pv.m} prices for {m} items")
    return pv


def load_matrix(path: str | Path, key: str, shape: tuple[int, int] | None = None) -> np.ndarray:
    doc = _read_json(path)
    values = doc.get(key) if isinstance(doc, dict) else doc
    try:
        arr = np.asarray(values, dtype=float)
    except (TypeError, ValueError):
        raise InputError(f"{path}: '{key}' is not a numeric matrix") from None
    if arr.ndim != 2 or (shape is not None and arr.shape != shape):
        raise InputError(f"{path}: '{key}' must have shape {shape}")
    return arr


def _cell(x: Any) -> str:
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    if isinstance(x, (list, tuple)):
        return " ".join(_cell(y) for y in x)
    return str(x)


def write_csv(rows: Iterable[dict], path: str | Path, columns: Sequence[str] | None = None) -> None:
    rows = list(rows)
    columns = list(columns or (rows[0].keys() if rows else []))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r[c]) for c in columns])


def _parse(cell: str) -> Any:
    for conv in (int, float):
        try:
            return conv(cell)
        except ValueError:
            pass
    return cell


def read_csv(path: str | Path) -> list[dict]:
    """Rows of a CSV written by :func:`write_csv`, with numbers converted back."""
    with open(path, newline="", encoding="utf-8") as fh:
        return [{k: _parse(v) for k, v in row.items()} for row in csv.DictReader(fh)]
