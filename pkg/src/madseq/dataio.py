"""Typed CSV datasets: column schemas, parsing, and writing.

A dataset column is either a bounded count or a binary indicator and plays
the role of a covariate or a response. Column order in the schema fixes the
grid coordinate order; generators and the CLI both put responses last so
that the response axis is the fastest-varying (contiguous) one.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import ConfigurationError, DataError
from .grids import Binary, Count, SupportGrid, make_grid

__all__ = [
    "ColumnSpec",
    "DatasetSchema",
    "Dataset",
    "parse_dataset",
    "write_dataset",
    "schema_from_json",
    "schema_to_json",
]

_KINDS = ("count", "binary")
_ROLES = ("covariate", "response")


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str
    role: str
    ymax: int | None = None

    def __post_init__(self) -> None:
        if not self.name:
            raise ConfigurationError("column name must be non-empty")
        if self.kind not in _KINDS:
            raise ConfigurationError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.role not in _ROLES:
            raise ConfigurationError(f"column {self.name!r}: unknown role {self.role!r}")
        if self.kind == "count":
            if self.ymax is None or self.ymax < 1:
                raise ConfigurationError(
                    f"count column {self.name!r} needs ymax >= 1, got {self.ymax}"
                )
        elif self.ymax is not None:
            raise ConfigurationError(f"binary column {self.name!r} must not set ymax")

    @property
    def upper(self) -> int:
        return self.ymax if self.kind == "count" else 1


@dataclass(frozen=True)
class DatasetSchema:
    columns: tuple[ColumnSpec, ...]

    def __post_init__(self) -> None:
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ConfigurationError("column names must be unique")
        if not any(c.role == "response" for c in self.columns):
            raise ConfigurationError("schema needs at least one response column")

    def to_grid(self) -> SupportGrid:
        coords = [
            Count(c.ymax) if c.kind == "count" else Binary() for c in self.columns
        ]
        return make_grid(coords)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def response_axes(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.columns) if c.role == "response")

    def covariate_axes(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.columns) if c.role == "covariate")


@dataclass(frozen=True)
class Dataset:
    schema: DatasetSchema
    rows: np.ndarray

    def __post_init__(self) -> None:
        if self.rows.ndim != 2 or self.rows.shape[1] != len(self.schema.columns):
            raise DataError(
                f"rows have shape {self.rows.shape}, schema has {len(self.schema.columns)} columns"
            )

    def __len__(self) -> int:
        return int(self.rows.shape[0])

    def points(self) -> list[tuple[int, ...]]:
        return [tuple(int(v) for v in row) for row in self.rows]


def _parse_cell(text: str, col: ColumnSpec, row_number: int) -> int:
    if text == "":
        raise DataError(f"missing value at row {row_number}, column {col.name!r}")
    try:
        value = int(text)
    except ValueError:
        raise DataError(
            f"non-integer value {text!r} at row {row_number}, column {col.name!r}"
        ) from None
    if col.kind == "binary" and value not in (0, 1):
        raise DataError(
            f"binary column {col.name!r} has value {value} at row {row_number}"
        )
    if not 0 <= value <= col.upper:
        raise DataError(
            f"value {value} out of range [0, {col.upper}] at row {row_number}, column {col.name!r}"
        )
    return value


def parse_dataset(path: str, schema: DatasetSchema) -> Dataset:
    """Read a comma-separated UTF-8 file with a header row. Row numbers in
    errors count data rows from 1."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        expected = list(schema.names)
        if header != expected:
            unknown = [h for h in header if h not in expected]
            if unknown:
                raise DataError(f"{path}: unknown column {unknown[0]!r}")
            raise DataError(
                f"{path}: header {header} does not match schema columns {expected}"
            )
        out: list[list[int]] = []
        for i, row in enumerate(reader, start=1):
            if len(row) != len(expected):
                raise DataError(
                    f"{path}: row {i} has {len(row)} fields, expected {len(expected)}"
                )
            out.append(
                [_parse_cell(cell, col, i) for cell, col in zip(row, schema.columns)]
            )
    rows = np.array(out, dtype=np.int64).reshape(len(out), len(schema.columns))
    return Dataset(schema=schema, rows=rows)


def write_dataset(dataset: Dataset, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(dataset.schema.names)
        for row in dataset.rows:
            writer.writerow([int(v) for v in row])


def schema_to_json(schema: DatasetSchema) -> list[dict]:
    out = []
    for c in schema.columns:
        entry: dict = {"name": c.name, "kind": c.kind, "role": c.role}
        if c.ymax is not None:
            entry["ymax"] = c.ymax
        out.append(entry)
    return out


def schema_from_json(obj: Iterable[dict]) -> DatasetSchema:
    columns = []
    for entry in obj:
        try:
            columns.append(
                ColumnSpec(
                    name=entry["name"],
                    kind=entry["kind"],
                    role=entry["role"],
                    ymax=entry.get("ymax"),
                )
            )
        except KeyError as exc:
            raise ConfigurationError(f"schema entry missing key {exc}") from None
    return DatasetSchema(columns=tuple(columns))
