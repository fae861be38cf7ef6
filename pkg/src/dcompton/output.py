"""Result serialization: a CSV grid plus a JSON metadata sidecar.

The CSV holds one row per grid cell (axis values, then value/error pairs
per column, then the mask code).  The JSON sidecar is self-contained: it
embeds the normalized config text, its digest, the axis definitions and
the full cell table, so `report` never needs the CSV back.  Both files
are written atomically and are byte-identical for identical config and
seed, whatever the worker count.
"""

import json
import os

import numpy as np

from .runner import ScanResult, TOTALS_QUANTITIES

FORMAT_TAG = "dcompton-scan/1"


def _atomic_write(path: str, data: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(data)
    os.replace(tmp, path)


def _axis_grids(result: ScanResult):
    """Axis definitions (grid vectors, not the cell-expanded columns)."""
    if result.observable == "totals":
        return [{"name": "quantity", "unit": "",
                 "values": list(TOTALS_QUANTITIES)}]
    out = []
    for spec, unit in zip(result.config.scan.axes, result.axis_units):
        out.append({"name": spec.name, "unit": unit,
                    "values": [float(v) for v in spec.grid()]})
    return out


def _fmt_cell(value, precision: int) -> str:
    if isinstance(value, str):
        return value
    return f"{float(value):.{precision}e}"


def render_csv(result: ScanResult) -> str:
    prec = result.config.output.precision
    lines = [
        "# dcompton scan result",
        f"# observable: {result.observable}",
        f"# config: {result.config_digest}",
        f"# version: {result.provenance['version']}",
    ]
    header = []
    units_note = []
    for name, unit in zip(result.axis_names, result.axis_units):
        header.append(name)
        units_note.append(f"{name} [{unit}]" if unit else name)
    for col in result.columns:
        header += [col.name, f"{col.name}_error"]
        units_note += [f"{col.name} [{col.unit}]",
                       f"{col.name}_error [{col.unit}]"]
    header.append("mask")
    lines.append("# columns: " + ", ".join(units_note) + ", mask")
    lines.append(",".join(header))

    n_cells = result.values.shape[0]
    for i in range(n_cells):
        row = [_fmt_cell(ax[i], prec) for ax in result.cell_axes]
        for j in range(len(result.columns)):
            row.append(_fmt_cell(result.values[i, j], prec))
            row.append(_fmt_cell(result.errors[i, j], prec))
        row.append(str(result.mask[i]))
        lines.append(",".join(row))

    for key in sorted(result.totals):
        lines.append(f"# {key} = {_fmt_cell(result.totals[key], prec)}")
    return "\n".join(lines) + "\n"


def render_sidecar(result: ScanResult) -> str:
    doc = {
        "format": FORMAT_TAG,
        "observable": result.observable,
        "config_digest": result.config_digest,
        "config": result.config_text,
        "provenance": result.provenance,
        "complete": result.complete,
        "axes": _axis_grids(result),
        "columns": [{"name": c.name, "unit": c.unit} for c in result.columns],
        "cells": {
            "axis_values": [[v if isinstance(v, str) else float(v)
                             for v in ax] for ax in result.cell_axes],
            "values": result.values.tolist(),
            "errors": result.errors.tolist(),
            "mask": [str(m) for m in result.mask],
        },
        "totals": {k: float(v) for k, v in result.totals.items()},
        "warnings": list(result.warnings),
    }
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def write_result(result: ScanResult, base: str | None = None) -> dict:
    """Write CSV + JSON next to each other; returns their paths."""
    if result.config.output.format != "csv":
        raise ValueError(
            f"unsupported output format {result.config.output.format!r}")
    base = base or result.config.output.path
    parent = os.path.dirname(base)
    if parent:
        os.makedirs(parent, exist_ok=True)
    paths = {"csv": base + ".csv", "json": base + ".json"}
    _atomic_write(paths["csv"], render_csv(result))
    _atomic_write(paths["json"], render_sidecar(result))
    return paths


def load_sidecar(path: str) -> dict:
    """Read a result sidecar back; accepts the base path or the .json."""
    if not path.endswith(".json"):
        path = path + ".json"
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != FORMAT_TAG:
        raise ValueError(f"{path!r} is not a scan result sidecar")
    cells = doc["cells"]
    doc["cells"]["values"] = np.asarray(cells["values"], dtype=float)
    doc["cells"]["errors"] = np.asarray(cells["errors"], dtype=float)
    return doc


__all__ = ["FORMAT_TAG", "load_sidecar", "render_csv", "render_sidecar",
           "write_result"]
