"""Single-column CSV ingestion and the bundled example series."""

from __future__ import annotations

import math
from importlib import resources
from pathlib import Path

from .core import TimeSeries
from .errors import EmptyFile, NonFiniteValue, ParseError

BUNDLED = ("death", "nile")


def parse_csv_text(text: str, label: str | None = None) -> TimeSeries:
    """Parse one value per line; a non-numeric first line is taken as a header."""
    values = []
    seen_content = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        cells = [c.strip().strip('"') for c in raw.split(",")]
        while cells and not cells[-1]:
            cells.pop()
        if not cells:
            continue
        first, seen_content = not seen_content, True
        if len(cells) != 1:
            raise ParseError(f"expected a single column, got {raw.strip()!r}", lineno)
        try:
            value = float(cells[0])
        except ValueError:
            if first:
                continue
            raise ParseError(f"not a number: {cells[0]!r}", lineno) from None
        if not math.isfinite(value):
            raise NonFiniteValue(f"line {lineno}: non-finite value {cells[0]!r}")
        values.append(value)
    if not values:
        raise EmptyFile(f"no values found in {label or 'input'}")
    return TimeSeries(values, label)


def ingest_csv(path) -> TimeSeries:
    """Read a single-column CSV file (optional header line) into a series."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return parse_csv_text(text, path.stem)


def load_bundled(name: str) -> TimeSeries:
    """``"death"`` (monthly US accidental deaths 1973-78) or ``"nile"`` (annual Nile flow 1871-1970)."""
    if name not in BUNDLED:
        raise KeyError(f"unknown bundled dataset {name!r}; choose from {BUNDLED}")
    text = resources.files("clvolterra").joinpath("data", f"{name}.csv").read_text(encoding="utf-8")
    return parse_csv_text(text, name)


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("clvolterra").joinpath("data", f"{name}.csv")))


def load_series(source: str) -> TimeSeries:
    """A bundled dataset name or a CSV path."""
    if source in BUNDLED and not Path(source).exists():
        return load_bundled(source)
    return ingest_csv(source)
