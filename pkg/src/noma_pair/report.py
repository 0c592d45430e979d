"""Result tables and their CSV form.

A table is a list of :class:`Row` plus a metadata mapping. On disk the
metadata comes first as ``# key=value`` comment lines, followed by the header
``sweep,method,power_mode,mean_metric,stderr,trials``.  Rows whose metric is
not the experiment's primary one carry it in the method column as
``method/metric``.  Floats are written with 17 significant digits so that
reading the file back gives bit-identical values.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import OutputError

HEADER = ("sweep", "method", "power_mode", "mean_metric", "stderr", "trials")


@dataclass(frozen=True)
class Row:
    sweep: float
    method: str
    power_mode: str
    metric: str
    mean: float
    stderr: float
    trials: int

    def label(self, primary_metric: str | None) -> str:
        if primary_metric is None or self.metric == primary_metric:
            return self.method
        return f"{self.method}/{self.metric}"


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    primary_metric: str | None = None

    def select(self, method=None, power_mode=None, metric=None) -> list:
        out = []
        for r in self.rows:
            if method is not None and r.method != method:
                continue
            if power_mode is not None and r.power_mode != power_mode:
                continue
            if metric is not None and r.metric != metric:
                continue
            out.append(r)
        return out

    def value(self, sweep, method, power_mode, metric=None) -> Row:
        metric = metric or self.primary_metric
        for r in self.rows:
            if r.sweep == sweep and r.method == method and r.power_mode == power_mode and r.metric == metric:
                return r
        raise KeyError((sweep, method, power_mode, metric))


def summarize(values: Iterable[float]) -> tuple[float, float, int]:
    """Mean (compensated summation), standard error and count."""
    v = np.asarray(list(values), dtype=float)
    n = v.size
    if n == 0:
        return math.nan, math.nan, 0
    mean = math.fsum(v) / n
    if n == 1:
        return mean, 0.0, 1
    var = math.fsum((v - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n), n


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def render_table(table: ResultTable) -> str:
    buf = io.StringIO()
    for key, value in table.metadata.items():
        text = str(value).replace("\n", " ")
        buf.write(f"# {key}={text}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    for r in table.rows:
        writer.writerow([_fmt(r.sweep), r.label(table.primary_metric), r.power_mode, _fmt(r.mean), _fmt(r.stderr), r.trials])
    return buf.getvalue()


def emit_table(table: ResultTable, path) -> None:
    try:
        Path(path).write_text(render_table(table))
    except OSError as exc:
        raise OutputError(f"cannot write result table to {path}: {exc}") from exc


def parse_table(text: str, primary_metric: str | None = None) -> ResultTable:
    metadata = {}
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            metadata[key] = value
        elif line.strip():
            body.append(line)
    reader = csv.reader(body)
    header = tuple(next(reader, ()))
    if header != HEADER:
        raise OutputError(f"unexpected header {header}")
    primary_metric = primary_metric or metadata.get("primary_metric")
    rows = []
    for sweep, label, mode, mean, stderr, trials in reader:
        method, _, metric = label.partition("/")
        rows.append(Row(float(sweep), method, mode, metric or primary_metric or "", float(mean), float(stderr), int(trials)))
    return ResultTable(rows, metadata, primary_metric)


def read_table(path) -> ResultTable:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OutputError(f"cannot read result table {path}: {exc}") from exc
    return parse_table(text)
