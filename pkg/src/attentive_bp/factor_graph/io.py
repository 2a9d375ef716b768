"""Instance file format.

A JSON document with the fields::

    {
      "version": 1,
      "domains": [15, 15, ...],
      "functions": [
        {"scope": [0, 3], "table": [12.5, 80.25, ...]},
        ...
      ],
      "meta": {"family": "random-cop", "params": {...}, "seed": 7, ...}
    }

``table`` is the row-major flattening of the cost array in scope order.
Costs are written with 17 significant digits so that reading a file back
reproduces every float64 exactly.  One function per line keeps files
diffable; serialisation is deterministic (sorted meta keys).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .instance import COPInstance, CostFunction, InvalidInstanceError

FORMAT_VERSION = 1


class InstanceFormatError(ValueError):
    """Malformed instance document; the message names where the problem is."""


def _number(x: float) -> str:
    return format(float(x), ".17g")


def serialize(instance: COPInstance) -> str:
    lines = ["{", f'  "version": {FORMAT_VERSION},', f'  "domains": {json.dumps(instance.domains)},']
    if instance.functions:
        lines.append('  "functions": [')
        rows = []
        for f in instance.functions:
            table = ", ".join(_number(x) for x in f.table.reshape(-1))
            rows.append(f'    {{"scope": {json.dumps(list(f.scope))}, "table": [{table}]}}')
        lines.append(",\n".join(rows))
        lines.append("  ],")
    else:
        lines.append('  "functions": [],')
    lines.append(f'  "meta": {json.dumps(instance.meta, sort_keys=True)}')
    lines.append("}")
    return "\n".join(lines) + "\n"


def serialize_bytes(instance: COPInstance) -> bytes:
    return serialize(instance).encode("utf-8")


def _require(cond: bool, where: str, what: str) -> None:
    if not cond:
        raise InstanceFormatError(f"{where}: {what}")


def deserialize(text: str | bytes) -> COPInstance:
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise InstanceFormatError(f"byte {exc.start}: not valid UTF-8") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None

    _require(isinstance(doc, dict), "document", "top level must be an object")
    for key in ("version", "domains", "functions"):
        _require(key in doc, "document", f"missing field {key!r}")
    _require(doc["version"] == FORMAT_VERSION, "version", f"unsupported version {doc['version']!r}")
    domains = doc["domains"]
    _require(isinstance(domains, list), "domains", "must be an array")
    for i, d in enumerate(domains):
        _require(isinstance(d, int) and not isinstance(d, bool) and d >= 1,
                 f"domains[{i}]", f"domain size must be a positive integer, got {d!r}")
    funcs = doc["functions"]
    _require(isinstance(funcs, list), "functions", "must be an array")

    functions = []
    n = len(domains)
    for idx, f in enumerate(funcs):
        where = f"functions[{idx}]"
        _require(isinstance(f, dict) and "scope" in f and "table" in f, where,
                 "expected an object with 'scope' and 'table'")
        scope, table = f["scope"], f["table"]
        _require(isinstance(scope, list) and all(isinstance(v, int) and not isinstance(v, bool) for v in scope),
                 f"{where}.scope", "must be an array of integers")
        for v in scope:
            _require(0 <= v < n, f"{where}.scope", f"function {idx} references unknown variable {v}")
        _require(isinstance(table, list) and all(isinstance(x, (int, float)) and not isinstance(x, bool)
                                                 for x in table),
                 f"{where}.table", "must be an array of numbers")
        expected = int(np.prod([domains[v] for v in scope], dtype=np.int64))
        _require(len(table) == expected, f"{where}.table",
                 f"function {idx} has {len(table)} costs, scope needs {expected}")
        functions.append(CostFunction(tuple(scope), np.asarray(table, dtype=np.float64)))

    meta = doc.get("meta", {})
    _require(isinstance(meta, dict), "meta", "must be an object")
    try:
        return COPInstance(domains, functions, meta)
    except InvalidInstanceError as exc:
        raise InstanceFormatError(str(exc)) from None


def save_instance(instance: COPInstance, path: str | Path) -> None:
    Path(path).write_text(serialize(instance), encoding="utf-8")


def load_instance(path: str | Path) -> COPInstance:
    try:
        return deserialize(Path(path).read_bytes())
    except InstanceFormatError as exc:
        raise InstanceFormatError(f"{path}: {exc}") from None
