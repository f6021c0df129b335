"""CSV and record-file output shared by all pipeline stages.

Floating-point values in CSV files are written with 17 significant
digits so every file round-trips to the exact binary double that
produced it.  Structured records (certificates, transition summaries,
run manifests) are YAML documents built from plain Python types.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
import yaml

FLOAT_FMT = "%.17g"


def format_value(x: Any) -> str:
    if isinstance(x, (float, np.floating)):
        return FLOAT_FMT % float(x)
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Write rows to `path` as CSV with a header line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([format_value(x) for x in row])
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    """Read a CSV file written by write_csv; cells come back as strings."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    return header, rows


def read_csv_columns(path) -> dict[str, np.ndarray]:
    """Read a numeric CSV into a column-name -> float array mapping."""
    header, rows = read_csv(path)
    data = np.asarray([[float(x) for x in row] for row in rows], dtype=float)
    if data.size == 0:
        data = data.reshape(0, len(header))
    return {name: data[:, j] for j, name in enumerate(header)}


def to_plain(obj: Any) -> Any:
    """Recursively convert numpy scalars/arrays and tuples to builtins."""
    if isinstance(obj, np.ndarray):
        return [to_plain(v) for v in obj.tolist()]
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Mapping):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    return obj


def write_record(path, record: Mapping[str, Any], kind: str | None = None) -> Path:
    """Write a mapping as a YAML record file.

    `kind` labels the record type in a leading `record` field so mixed
    output directories stay self-describing.
    """
    doc: dict[str, Any] = {}
    if kind is not None:
        doc["record"] = kind
    doc.update(to_plain(record))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)
    return path


def read_record(path) -> dict[str, Any]:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: expected a mapping record")
    return doc
