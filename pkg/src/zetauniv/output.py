"""Result files: summary text, JSON-lines records, CSV tables and plot data.

Every file is written to a temporary name in the target directory and then
renamed, so an interrupted run never leaves a truncated file behind. Floats
are printed with 17 significant digits.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable

import numpy as np

SUMMARY = "summary.txt"
RECORDS = "records.jsonl"
TABLES = "tables.csv"
PLOT = "plot.csv"


def fmt(x) -> str:
    """Scalar to text: floats with 17 significant digits, complex as a+bj."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (complex, np.complexfloating)):
        z = complex(x)
        sign = "+" if z.imag >= 0 or math.isnan(z.imag) else "-"
        return f"{format(z.real, '.17g')}{sign}{format(abs(z.imag), '.17g')}j"
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def to_json(obj: Any) -> str:
    """Deterministic JSON: keys in insertion order, floats at 17 digits, NaN as null."""
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return format(x, ".17g") if math.isfinite(x) else "null"
    if isinstance(obj, (complex, np.complexfloating)):
        z = complex(obj)
        return "[" + to_json(z.real) + ", " + to_json(z.imag) + "]"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(json.dumps(str(k)) + ": " + to_json(v) for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(to_json(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def csv_text(header: list[str], rows: Iterable[Iterable]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def summary_text(config_text: str, results: dict) -> str:
    lines = ["# zetauniv run summary", "[config]", config_text.rstrip(), "", "[result]"]
    for k, v in results.items():
        lines.append(f"{k} = {to_json(v) if isinstance(v, (dict, list, tuple)) else fmt(v)}")
    return "\n".join(lines) + "\n"


@dataclass
class ResultSink:
    directory: Path

    def __post_init__(self):
        self.directory = Path(self.directory)

    @property
    def summary_path(self) -> Path:
        return self.directory / SUMMARY

    @property
    def records_path(self) -> Path:
        return self.directory / RECORDS

    @property
    def tables_path(self) -> Path:
        return self.directory / TABLES

    @property
    def plot_path(self) -> Path:
        return self.directory / PLOT


def emit_results(sink: ResultSink, config_text: str, results: dict, records: Iterable[dict],
                 table: tuple[list[str], list], plot: tuple[list[str], Iterable]) -> list[Path]:
    """Write the four result files; the summary goes last so it marks a complete run."""
    rec = "".join(to_json(r) + "\n" for r in records)
    atomic_write(sink.records_path, rec)
    atomic_write(sink.tables_path, csv_text(*table))
    atomic_write(sink.plot_path, csv_text(*plot))
    atomic_write(sink.summary_path, summary_text(config_text, results))
    return [sink.summary_path, sink.records_path, sink.tables_path, sink.plot_path]
