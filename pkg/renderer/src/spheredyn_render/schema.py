"""Readers for the spheredyn CSV artifact schema.

Three file kinds, all UTF-8 with ``#``-prefixed ``key = value`` header
comments followed by one column-name row:

- metrics:   fixed columns time, align_E, align_F, align_Fabs,
             w2_to_target, v_p, energy (empty cell = metric absent),
             optionally followed by envelope columns
- bands:     time plus ``<metric>_mean/_lo/_hi`` triples
- snapshots: token coordinates x0..x{d-1}; subspace marker bases are
             embedded as ``E_basis`` / ``F_basis`` / ``Fabs_basis`` header
             entries

The renderer is a pure view of these files; nothing is recomputed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

METRIC_COLUMNS = ("time", "align_E", "align_F", "align_Fabs", "w2_to_target", "v_p", "energy")


class SchemaMismatchError(Exception):
    """The file does not follow the documented artifact schema."""


class MissingColumnError(Exception):
    """A column required by the figure spec is absent from the data."""


def _read_table(path: str) -> tuple[dict, list[str], list[list[str]]]:
    header: dict = {}
    columns: list[str] | None = None
    rows: list[list[str]] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                body = line[1:].strip()
                if " = " in body:
                    key, value = body.split(" = ", 1)
                    header[key.strip()] = value
                continue
            if not line:
                continue
            if columns is None:
                columns = line.split(",")
            else:
                cells = line.split(",")
                if len(cells) != len(columns):
                    raise SchemaMismatchError(
                        f"{path}: row has {len(cells)} cells, expected {len(columns)}"
                    )
                rows.append(cells)
    if columns is None:
        raise SchemaMismatchError(f"{path}: no column row found")
    return header, columns, rows


def _to_float(cell: str) -> float:
    return math.nan if cell == "" else float(cell)


@dataclass
class MetricsTable:
    header: dict
    columns: list[str]
    data: dict  # column name -> float array with NaN for absent cells

    @property
    def beta(self) -> float | None:
        raw = self.header.get("run.beta")
        if raw is None:
            return None
        return math.inf if raw == "inf" else float(raw)

    def series(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        """(time, values) restricted to rows where the column is present."""
        if name not in self.data:
            raise MissingColumnError(f"column {name!r} not in file (has {self.columns})")
        values = self.data[name]
        mask = ~np.isnan(values)
        return self.data["time"][mask], values[mask]


def load_metrics(path: str) -> MetricsTable:
    header, columns, rows = _read_table(path)
    if columns[0] != "time" or list(columns[: len(METRIC_COLUMNS)]) != list(METRIC_COLUMNS):
        raise SchemaMismatchError(
            f"{path}: metrics files start with columns {METRIC_COLUMNS}, got {columns}"
        )
    data = {name: np.array([_to_float(r[i]) for r in rows]) for i, name in enumerate(columns)}
    return MetricsTable(header=header, columns=columns, data=data)


@dataclass
class BandsTable:
    header: dict
    metrics: list[str]
    time: np.ndarray
    bands: dict  # metric -> dict(mean=, lo=, hi=) arrays

    @property
    def beta(self) -> float | None:
        raw = self.header.get("run.beta")
        if raw is None:
            return None
        return math.inf if raw == "inf" else float(raw)


def load_bands(path: str) -> BandsTable:
    header, columns, rows = _read_table(path)
    if columns[0] != "time":
        raise SchemaMismatchError(f"{path}: bands files start with a time column")
    names = []
    for col in columns[1:]:
        if not col.endswith(("_mean", "_lo", "_hi")):
            raise SchemaMismatchError(f"{path}: unexpected bands column {col!r}")
        base = col.rsplit("_", 1)[0]
        if base not in names:
            names.append(base)
    for base in names:
        for part in ("mean", "lo", "hi"):
            if f"{base}_{part}" not in columns:
                raise SchemaMismatchError(f"{path}: incomplete band triple for {base!r}")
    time = np.array([_to_float(r[0]) for r in rows])
    bands = {}
    for base in names:
        bands[base] = {
            part: np.array([_to_float(r[columns.index(f"{base}_{part}")]) for r in rows])
            for part in ("mean", "lo", "hi")
        }
    return BandsTable(header=header, metrics=names, time=time, bands=bands)


@dataclass
class SnapshotTable:
    header: dict
    tokens: np.ndarray
    bases: dict  # marker name ("E" | "F" | "Fabs") -> (d, k) array

    @property
    def time(self) -> float | None:
        raw = self.header.get("snapshot.time")
        return None if raw is None else float(raw)


def load_snapshot(path: str) -> SnapshotTable:
    header, columns, rows = _read_table(path)
    if any(col != f"x{i}" for i, col in enumerate(columns)):
        raise SchemaMismatchError(f"{path}: snapshot columns must be x0..x{{d-1}}, got {columns}")
    tokens = np.array([[float(c) for c in row] for row in rows])
    bases = {}
    for key, name in (("E_basis", "E"), ("F_basis", "F"), ("Fabs_basis", "Fabs")):
        if key in header:
            basis = np.array(json.loads(header[key]), dtype=float)
            if basis.ndim != 2 or basis.shape[0] != tokens.shape[1]:
                raise SchemaMismatchError(f"{path}: {key} shape does not match the token dimension")
            bases[name] = basis
    return SnapshotTable(header=header, tokens=tokens, bases=bases)
