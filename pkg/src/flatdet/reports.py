"""Report records, canonical JSON, content hashing, and CSV emission.

Reports are plain dicts with a fixed shape: config echo, per-case rows
carrying provenance tags, verdicts, and a meta block.  Canonical JSON
(sorted keys, 17-significant-digit floats, complex as [re, im]) makes cache
keys and golden files platform-stable; the meta block (wall clock, timestamp)
is excluded from hashing and from byte comparisons.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile

import numpy as np

PROVENANCE_TAGS = ("derived-oracle", "trivial", "internal-crosscheck")


def _canonical_value(value):
    if isinstance(value, dict):
        return {str(k): _canonical_value(v) for k, v in sorted(value.items())}
    if isinstance(value, (list, tuple)):
        return [_canonical_value(v) for v in value]
    if isinstance(value, (bool, int, str)) or value is None:
        return value
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        z = complex(value)
        return {"re": _format_float(z.real), "im": _format_float(z.imag)}
    if isinstance(value, (float, np.floating)):
        return _format_float(float(value))
    raise TypeError(f"cannot canonicalize {type(value)!r}")


def _format_float(x):
    if x != x:  # NaN
        return "nan"
    if x in (float("inf"), float("-inf")):
        return "inf" if x > 0 else "-inf"
    if x == int(x) and abs(x) < 1e15:
        return float(x)
    return float(f"{x:.17g}")


def canonical_json(data) -> str:
    """Deterministic JSON text: sorted keys, stable float formatting."""
    return json.dumps(_canonical_value(data), sort_keys=True, indent=1)


def cache_key(config: dict) -> str:
    """Stable content hash of a resolved config (meta-free)."""
    body = {k: v for k, v in config.items() if k != "meta"}
    return hashlib.sha256(canonical_json(body).encode()).hexdigest()


def report_body(report: dict) -> dict:
    return {k: v for k, v in report.items() if k != "meta"}


def write_json_atomic(path, data):
    """Serialize canonically and rename into place."""
    text = canonical_json(data)
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
            handle.write("\n")
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def load_json(path):
    with open(path) as handle:
        return json.load(handle)


def _flatten_cell(value):
    if isinstance(value, dict) and set(value) == {"re", "im"}:
        return {"_re": value["re"], "_im": value["im"]}
    if isinstance(value, (complex, np.complexfloating)):
        z = complex(value)
        return {"_re": _format_float(z.real), "_im": _format_float(z.imag)}
    if isinstance(value, (np.floating, float)):
        return {"": _format_float(float(value))}
    if isinstance(value, (np.integer,)):
        return {"": int(value)}
    if isinstance(value, (list, tuple)):
        return {"": json.dumps(_canonical_value(value))}
    return {"": value}


def write_csv(path, rows):
    """Delimited table of the report rows; complex values split into
    _re/_im columns so the output is directly plottable."""
    import csv

    flat_rows = []
    columns = []
    for row in rows:
        flat = {}
        for key, value in row.items():
            for suffix, cell in _flatten_cell(value).items():
                name = f"{key}{suffix}"
                flat[name] = cell
                if name not in columns:
                    columns.append(name)
        flat_rows.append(flat)
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    with os.fdopen(fd, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=columns, restval="")
        writer.writeheader()
        for flat in flat_rows:
            writer.writerow(flat)
    os.replace(tmp, path)


def make_row(provenance: str, **fields) -> dict:
    if provenance not in PROVENANCE_TAGS:
        raise ValueError(f"unknown provenance tag {provenance!r}")
    row = {"provenance": provenance}
    row.update(fields)
    return row
