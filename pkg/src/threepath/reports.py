"""CSV emission and re-ingestion for scan, sweep, and run-level outputs.

Floats are written with ``repr`` so values round-trip exactly and identical
inputs produce byte-identical files.  Missing kappa values (degenerate
normalization at a grid point) are empty fields.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .experiment import LegRecord, ScanResult, SweepRow
from .model import PathSet

GRID_COLUMNS = ("phi_A", "phi_C", "r_abc_det_cps", "kappa_mean", "kappa_stderr",
                "kappa_det_pred")
SWEEP_COLUMNS = ("r_abc_det_cps", "kappa_det", "kappa_exp", "kappa_stderr")
RUNS_COLUMNS = ("run_index", "combination", "order_position", "count",
                "duration_s", "seed")


def _fmt(value: float) -> str:
    if isinstance(value, float) and math.isnan(value):
        return ""
    return repr(float(value))


def _parse(field: str) -> float:
    return math.nan if field == "" else float(field)


@dataclass(frozen=True)
class GridData:
    """Rectangular grid parsed back from a grid CSV; arrays are [i_a, j_c]."""

    phi_a: tuple[float, ...]
    phi_c: tuple[float, ...]
    fields: dict[str, np.ndarray]

    def field(self, name: str) -> np.ndarray:
        if name not in self.fields:
            raise ValueError(f"unknown grid field {name!r}; have {sorted(self.fields)}")
        return self.fields[name]


def write_grid_csv(result: ScanResult, path: str | Path) -> None:
    """Per-point scan CSV, row-major over (phi_A, phi_C) in radians."""
    spec = result.spec
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(GRID_COLUMNS)
        for i, la in enumerate(spec.grid_a):
            for j, lc in enumerate(spec.grid_c):
                writer.writerow([
                    _fmt(la), _fmt(lc),
                    _fmt(result.r_abc_det[i, j]),
                    _fmt(result.kappa_mean[i, j]),
                    _fmt(result.kappa_stderr[i, j]),
                    _fmt(result.kappa_det_pred[i, j]),
                ])


def read_grid_csv(path: str | Path) -> GridData:
    """Re-ingest a grid CSV; the point set must form a full rectangle."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = tuple(next(reader))
        except StopIteration:
            raise ValueError(f"{path}: empty grid file") from None
        if header != GRID_COLUMNS:
            raise ValueError(f"{path}: bad header {list(header)!r}, "
                             f"expected {list(GRID_COLUMNS)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(GRID_COLUMNS):
                raise ValueError(f"{path}:{lineno}: expected {len(GRID_COLUMNS)} "
                                 f"fields, got {len(row)}")
            try:
                rows.append([_parse(v) for v in row])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise ValueError(f"{path}: no grid points")
    phi_a = sorted({r[0] for r in rows})
    phi_c = sorted({r[1] for r in rows})
    if len(rows) != len(phi_a) * len(phi_c):
        have = {(r[0], r[1]) for r in rows}
        missing = next((a, c) for a in phi_a for c in phi_c if (a, c) not in have)
        raise ValueError(
            f"{path}: ragged grid; no row for phi_A={missing[0]!r}, "
            f"phi_C={missing[1]!r} ({len(rows)} points cannot fill the "
            f"{len(phi_a)} x {len(phi_c)} rectangle)"
        )
    index_a = {v: i for i, v in enumerate(phi_a)}
    index_c = {v: j for j, v in enumerate(phi_c)}
    fields = {name: np.full((len(phi_a), len(phi_c)), np.nan)
              for name in GRID_COLUMNS[2:]}
    seen = set()
    for lineno, row in enumerate(rows, start=2):
        key = (row[0], row[1])
        if key in seen:
            raise ValueError(f"{path}:{lineno}: duplicate grid point {key}")
        seen.add(key)
        i, j = index_a[row[0]], index_c[row[1]]
        for name, value in zip(GRID_COLUMNS[2:], row[2:]):
            fields[name][i, j] = value
    return GridData(phi_a=tuple(phi_a), phi_c=tuple(phi_c), fields=fields)


def write_sweep_csv(rows: Sequence[SweepRow], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row.r_abc_det), _fmt(row.kappa_det),
                             _fmt(row.kappa_exp), _fmt(row.kappa_stderr)])


def read_sweep_csv(path: str | Path) -> list[dict[str, float]]:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != SWEEP_COLUMNS:
            raise ValueError(f"{path}: bad header {list(header)!r}, "
                             f"expected {list(SWEEP_COLUMNS)}")
        out = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(SWEEP_COLUMNS):
                raise ValueError(f"{path}:{lineno}: expected "
                                 f"{len(SWEEP_COLUMNS)} fields, got {len(row)}")
            out.append(dict(zip(SWEEP_COLUMNS, (_parse(v) for v in row))))
    return out


def write_runs_csv(legs: Iterable[LegRecord], path: str | Path) -> None:
    """Run-level audit CSV: every simulated leg with its order position."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RUNS_COLUMNS)
        for leg in legs:
            writer.writerow([leg.run_index, leg.combination.label,
                             leg.order_position, leg.count,
                             _fmt(leg.duration), leg.seed])


def read_runs_csv(path: str | Path) -> list[LegRecord]:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != RUNS_COLUMNS:
            raise ValueError(f"{path}: bad header {list(header)!r}, "
                             f"expected {list(RUNS_COLUMNS)}")
        out = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(RUNS_COLUMNS):
                raise ValueError(f"{path}:{lineno}: expected "
                                 f"{len(RUNS_COLUMNS)} fields, got {len(row)}")
            out.append(LegRecord(
                run_index=int(row[0]),
                combination=PathSet.from_label(row[1]),
                order_position=int(row[2]),
                count=int(row[3]),
                duration=float(row[4]),
                seed=int(row[5]),
            ))
    return out
