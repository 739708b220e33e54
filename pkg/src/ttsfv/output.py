"""CSV and JSON writers; floats keep 17 significant digits so they round-trip."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _jsonable(obj):
    if is_dataclass(obj):
        return _jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def write_table(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])
    return path


def read_table(path) -> tuple[list, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    data = np.array([[float(x) if x else np.nan for x in r] for r in rows[1:]], dtype=np.float64)
    return rows[0], data.reshape(len(rows) - 1, len(rows[0]))


def write_field(path, field) -> Path:
    """One row per physical cell: coordinates, expectation, standard deviation."""
    names = ["x", "y", "z"][: len(field.coords)]
    grids = np.meshgrid(*field.coords, indexing="ij")
    cols = [g.ravel() for g in grids] + [np.ravel(field.mean), np.ravel(field.std)]
    return write_table(path, names + ["expectation", "std"], zip(*cols))


def write_json(path, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2)
    return path


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def emit_outputs(outdir, scenario_name: str, fields, report=None, config=None, extra=None) -> list[Path]:
    """Write per-quantity field CSVs and a metadata JSON into ``outdir``."""
    outdir = Path(outdir)
    paths = [write_field(outdir / f"{scenario_name}_{f.name}.csv", f) for f in fields]
    meta = {"scenario": scenario_name, "config": config, "time": fields[0].t if fields else None}
    if report is not None:
        meta["report"] = report.to_dict()
    if extra:
        meta.update(extra)
    paths.append(write_json(outdir / f"{scenario_name}_run.json", meta))
    return paths
