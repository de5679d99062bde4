"""CSV result tables and plain-text field snapshots.

Numbers are written with 17 significant digits so every double survives a
round trip; files are written to a temporary sibling and renamed into place.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path

import numpy as np

from .ensemble import EnsembleStats, SweepResult


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def atomic_write(path, text: str) -> None:
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row has {len(row)} columns, header has {len(header)}")
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def stats_table(stats: EnsembleStats):
    header = ["t", "n"]
    for name in stats.names:
        header += [f"{name}_mean", f"{name}_stderr", f"{name}_min", f"{name}_max"]
    columns = [stats.times, stats.count]
    for name in stats.names:
        columns += [stats.mean[name], stats.stderr(name), stats.min[name], stats.max[name]]
    rows = [list(r) for r in zip(*columns)] if len(stats.times) else []
    return header, rows


SWEEP_HEADER = ["param", "value", "r_hat", "mu2_minus_alpha_star", "mu_star", "lambda_star", "a2",
                "prediction", "verdict", "slope", "slope_stderr", "perm_avg_min", "perm_avg_max"]


def sweep_table(result: SweepResult):
    rows = []
    for r in result.rows:
        rep = r.report
        rows.append([result.param, r.value, rep.r_hat, rep.mu2_minus_alpha_star, rep.mu_star,
                     rep.lambda_star, rep.a2, r.prediction, r.verdict, r.slope, r.slope_stderr,
                     min(r.perm_averages), max(r.perm_averages)])
    return SWEEP_HEADER, rows


def write_results(result, path) -> None:
    """Write ensemble statistics or a sweep result as comma-separated text."""
    if isinstance(result, EnsembleStats):
        header, rows = stats_table(result)
    elif isinstance(result, SweepResult):
        header, rows = sweep_table(result)
    else:
        raise TypeError(f"cannot serialise {type(result).__name__}")
    atomic_write(path, _csv_text(header, rows))


def read_results(path):
    """Header and rows of a result file; numeric cells come back as floats."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = []
        for row in reader:
            parsed = []
            for cell in row:
                try:
                    parsed.append(float(cell))
                except ValueError:
                    parsed.append(cell)
            rows.append(parsed)
    return header, rows


def write_snapshot(path, grid, s, i) -> None:
    """One line per cell: ``x S I``."""
    lines = [f"{fmt(x)} {fmt(a)} {fmt(b)}" for x, a, b in zip(grid.centers, s, i)]
    atomic_write(path, "\n".join(lines) + "\n")


def read_snapshot(path):
    data = np.loadtxt(path, ndmin=2)
    return data[:, 0], data[:, 1], data[:, 2]
