"""Reports: JSON (source of truth), CSV renderings and plot data.

Floats are written with 17 significant digits so every CSV value parses back
to the same double as its JSON counterpart. Non-finite floats become JSON
``null`` and empty CSV cells. Files are written atomically.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .kspa import ecdf

SCHEMA_VERSION = "1"
MIN_HIST_BINS = 5


def format_float(x: float) -> str:
    text = format(float(x), ".17g")
    if text.lstrip("-").isdigit():
        text += ".0"
    return text


def _to_plain(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_to_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def dumps(obj: Any, indent: int = 2) -> str:
    """JSON text with floats at 17 significant digits and sorted keys."""
    return _encode(_to_plain(obj), 0, indent) + "\n"


def _encode(obj: Any, level: int, indent: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (list, dict)) for v in obj):
            return "[" + ", ".join(_encode(v, level + 1, indent) for v in obj) + "]"
        items = [pad + _encode(v, level + 1, indent) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_encode(obj[k], level + 1, indent)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _cell(v: Any) -> str:
    v = _to_plain(v)
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format_float(v) if math.isfinite(v) else ""
    return str(v)


@dataclass
class Table:
    columns: list
    rows: list

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_cell(v) for v in row])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"columns": list(self.columns), "rows": [list(r) for r in self.rows]}


@dataclass
class Report:
    """Named results plus the tables and plot data rendered from them."""

    command: str
    settings: dict
    results: dict
    tables: dict = field(default_factory=dict)
    plots: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "settings": self.settings,
            "results": self.results,
            "tables": {k: v.to_dict() for k, v in self.tables.items()},
            "plots": {k: v.to_dict() for k, v in self.plots.items()},
        }

    def to_json(self) -> str:
        return dumps(self.to_dict())

    def write(self, out_dir, name: str | None = None) -> list[Path]:
        """Write ``<name>.json``, one CSV per table and the plot data."""
        out = Path(out_dir)
        name = name or self.command
        written = [out / f"{name}.json"]
        atomic_write(written[0], self.to_json())
        for key, table in self.tables.items():
            path = out / f"{key}.csv"
            atomic_write(path, table.to_csv())
            written.append(path)
        written.extend(emit_plot_data(self, out))
        return written


def emit_plot_data(report: Report, out_dir) -> list[Path]:
    out = Path(out_dir) / "plots"
    paths = []
    for key, table in report.plots.items():
        path = out / f"{key}.csv"
        atomic_write(path, table.to_csv())
        paths.append(path)
    return paths


def ecdf_table(values) -> Table:
    """Jump points ``(x, F(x))`` of the empirical CDF."""
    return Table(["x", "ecdf"], [list(r) for r in ecdf(values).steps()])


def histogram_bins(values) -> np.ndarray:
    """Freedman-Diaconis bin edges, never fewer than five bins."""
    v = np.asarray(values, dtype=np.float64)
    edges = np.histogram_bin_edges(v, bins="fd")
    if edges.size - 1 < MIN_HIST_BINS:
        edges = np.histogram_bin_edges(v, bins=MIN_HIST_BINS)
    return edges


def histogram_table(values) -> Table:
    v = np.asarray(values, dtype=np.float64)
    edges = histogram_bins(v)
    counts, _ = np.histogram(v, bins=edges)
    rows = [[float(edges[i]), float(edges[i + 1]), int(counts[i])] for i in range(counts.size)]
    return Table(["bin_left", "bin_right", "count"], rows)


def read_csv_table(path) -> Table:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return Table(rows[0], rows[1:])


def columns_table(columns: Sequence[str], *arrays) -> Table:
    """Table from equal-length column arrays."""
    rows = [list(r) for r in zip(*[np.asarray(a).tolist() for a in arrays])]
    return Table(list(columns), rows)
