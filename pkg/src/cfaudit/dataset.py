"""Tabular data model: schema-driven CSV loading, validation, and subgroup indexing.

Internal audit data carries protected-group labels, a binary treatment D,
binary outcome Y, binary prediction S, and a fixed-width covariate block.
External data carries only group labels and a declared shared subset of the
covariates. Complete cases are required; rows with missing cells are
rejected (impute upstream if needed).
"""

from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass, field

import numpy as np


class DataError(Exception):
    """Base class for schema / data validation failures."""


class MissingColumn(DataError):
    pass


class NonBinaryValue(DataError):
    pass


class UnknownLevel(DataError):
    pass


class MissingValue(DataError):
    pass


class LevelSetMismatch(DataError):
    pass


class NonNumericValue(DataError):
    pass


@dataclass(frozen=True)
class GroupKey:
    """A realized protected-characteristic vector; hashable, usable as a dict key."""

    levels: tuple[str, ...]

    def label(self) -> str:
        return "|".join(self.levels)

    def __len__(self) -> int:
        return len(self.levels)

    def __iter__(self):
        return iter(self.levels)


@dataclass(frozen=True)
class SchemaSpec:
    """Column layout of a dataset: protected characteristics with their level
    sets, the D/Y/S column names, and covariate columns.

    ``external_covariates`` is the declared subset of ``covariates`` shared
    with external data; it defaults to the full covariate list.
    """

    characteristics: tuple[str, ...]
    level_sets: tuple[tuple[str, ...], ...]
    treatment: str
    outcome: str
    prediction: str
    covariates: tuple[str, ...]
    external_covariates: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.characteristics) != len(self.level_sets):
            raise ValueError("one level set required per characteristic")
        if not self.characteristics:
            raise ValueError("at least one protected characteristic required")
        if not self.external_covariates:
            object.__setattr__(self, "external_covariates", self.covariates)
        unknown = set(self.external_covariates) - set(self.covariates)
        if unknown:
            raise ValueError(f"external covariates not in internal schema: {sorted(unknown)}")

    def all_groups(self) -> list[GroupKey]:
        """Every combination of characteristic levels, in level-set product order."""
        return [GroupKey(levels) for levels in itertools.product(*self.level_sets)]

    def group_code(self, key: GroupKey) -> int:
        return self.all_groups().index(key)

    @classmethod
    def from_json(cls, path) -> "SchemaSpec":
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "SchemaSpec":
        chars = tuple(c["name"] for c in raw["characteristics"])
        levels = tuple(tuple(str(v) for v in c["levels"]) for c in raw["characteristics"])
        return cls(
            characteristics=chars,
            level_sets=levels,
            treatment=raw["treatment"],
            outcome=raw["outcome"],
            prediction=raw["prediction"],
            covariates=tuple(raw["covariates"]),
            external_covariates=tuple(raw.get("external_covariates", raw["covariates"])),
        )

    def to_dict(self) -> dict:
        return {
            "characteristics": [
                {"name": c, "levels": list(ls)}
                for c, ls in zip(self.characteristics, self.level_sets)
            ],
            "treatment": self.treatment,
            "outcome": self.outcome,
            "prediction": self.prediction,
            "covariates": list(self.covariates),
            "external_covariates": list(self.external_covariates),
        }


@dataclass(frozen=True)
class AuditRecord:
    group: GroupKey
    d: int
    y: int
    s: int
    x: np.ndarray


@dataclass(frozen=True)
class ExternalRecord:
    group: GroupKey
    x: np.ndarray


@dataclass
class AuditDataset:
    """Columnar internal dataset. Immutable after construction; group labels
    are interned to integer codes indexing ``schema.all_groups()``."""

    schema: SchemaSpec
    group_codes: np.ndarray  # (n,) int codes into schema.all_groups()
    d: np.ndarray  # (n,) 0/1
    y: np.ndarray  # (n,) 0/1
    s: np.ndarray  # (n,) 0/1
    x: np.ndarray  # (n, p) float
    group_index: dict[GroupKey, np.ndarray] = field(init=False)

    def __post_init__(self):
        n = len(self.group_codes)
        for name, col in (("d", self.d), ("y", self.y), ("s", self.s)):
            if len(col) != n:
                raise ValueError(f"column {name} has length {len(col)}, expected {n}")
        if self.x.shape != (n, len(self.schema.covariates)):
            raise ValueError("covariate block does not match schema")
        groups = self.schema.all_groups()
        self.group_index = {
            g: np.flatnonzero(self.group_codes == code) for code, g in enumerate(groups)
        }

    @property
    def n(self) -> int:
        return len(self.group_codes)

    def groups_present(self) -> list[GroupKey]:
        return [g for g, idx in self.group_index.items() if len(idx) > 0]

    def group_of(self, i: int) -> GroupKey:
        return self.schema.all_groups()[self.group_codes[i]]

    def records(self):
        groups = self.schema.all_groups()
        for i in range(self.n):
            yield AuditRecord(
                group=groups[self.group_codes[i]],
                d=int(self.d[i]),
                y=int(self.y[i]),
                s=int(self.s[i]),
                x=self.x[i].copy(),
            )

    def take(self, indices) -> "AuditDataset":
        """Row subset (with repetition allowed) sharing the same schema."""
        idx = np.asarray(indices, dtype=int)
        return AuditDataset(
            schema=self.schema,
            group_codes=self.group_codes[idx],
            d=self.d[idx],
            y=self.y[idx],
            s=self.s[idx],
            x=self.x[idx],
        )


@dataclass
class ExternalDataset:
    """Columnar external dataset: group labels plus the shared covariates only."""

    schema: SchemaSpec
    group_codes: np.ndarray
    x: np.ndarray  # (n, p') over schema.external_covariates

    @property
    def n(self) -> int:
        return len(self.group_codes)

    def __len__(self) -> int:
        return self.n

    def records(self):
        groups = self.schema.all_groups()
        for i in range(self.n):
            yield ExternalRecord(group=groups[self.group_codes[i]], x=self.x[i].copy())


def _read_rows(path):
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        rows = list(reader)
    if not rows:
        raise MissingColumn(f"{path}: empty file, header row required")
    return rows[0], rows[1:]


def _column_map(header, needed, path):
    positions = {}
    for name in needed:
        if name not in header:
            raise MissingColumn(f"{path}: missing column '{name}'")
        positions[name] = header.index(name)
    return positions


def _parse_binary(cell, column, row_num):
    if cell == "":
        raise MissingValue(f"empty {column} cell in row {row_num}")
    if cell not in ("0", "1"):
        raise NonBinaryValue(f"non-binary value '{cell}' for {column} in row {row_num}")
    return int(cell)


def _parse_float(cell, column, row_num):
    if cell == "":
        raise MissingValue(f"empty {column} cell in row {row_num}")
    try:
        return float(cell)
    except ValueError:
        raise NonNumericValue(f"non-numeric value '{cell}' for {column} in row {row_num}") from None


def _group_code_table(schema: SchemaSpec) -> dict[tuple[str, ...], int]:
    return {g.levels: code for code, g in enumerate(schema.all_groups())}


def load_internal(path, schema: SchemaSpec) -> AuditDataset:
    """Load and validate an internal audit CSV against the schema.

    Raises MissingColumn, NonBinaryValue, UnknownLevel, MissingValue, or
    NonNumericValue with the offending row number (1-based, header excluded).
    """
    header, rows = _read_rows(path)
    needed = (
        list(schema.characteristics)
        + [schema.treatment, schema.outcome, schema.prediction]
        + list(schema.covariates)
    )
    pos = _column_map(header, needed, path)
    codes = _group_code_table(schema)

    n = len(rows)
    group_codes = np.empty(n, dtype=np.int64)
    d = np.empty(n, dtype=np.int8)
    y = np.empty(n, dtype=np.int8)
    s = np.empty(n, dtype=np.int8)
    x = np.empty((n, len(schema.covariates)), dtype=np.float64)

    for i, row in enumerate(rows):
        row_num = i + 1
        levels = []
        for j, char in enumerate(schema.characteristics):
            cell = row[pos[char]].strip()
            if cell == "":
                raise MissingValue(f"empty {char} cell in row {row_num}")
            if cell not in schema.level_sets[j]:
                raise UnknownLevel(f"unknown level '{cell}' for {char} in row {row_num}")
            levels.append(cell)
        group_codes[i] = codes[tuple(levels)]
        d[i] = _parse_binary(row[pos[schema.treatment]].strip(), schema.treatment, row_num)
        y[i] = _parse_binary(row[pos[schema.outcome]].strip(), schema.outcome, row_num)
        s[i] = _parse_binary(row[pos[schema.prediction]].strip(), schema.prediction, row_num)
        for j, cov in enumerate(schema.covariates):
            x[i, j] = _parse_float(row[pos[cov]].strip(), cov, row_num)

    return AuditDataset(schema=schema, group_codes=group_codes, d=d, y=y, s=s, x=x)


def load_external(path, schema: SchemaSpec) -> ExternalDataset:
    """Load an external CSV: group labels plus the declared shared covariates.

    A group label absent from the internal schema raises LevelSetMismatch.
    A header-only file yields an empty (valid) dataset.
    """
    header, rows = _read_rows(path)
    needed = list(schema.characteristics) + list(schema.external_covariates)
    pos = _column_map(header, needed, path)
    codes = _group_code_table(schema)

    n = len(rows)
    group_codes = np.empty(n, dtype=np.int64)
    x = np.empty((n, len(schema.external_covariates)), dtype=np.float64)

    for i, row in enumerate(rows):
        row_num = i + 1
        levels = []
        for j, char in enumerate(schema.characteristics):
            cell = row[pos[char]].strip()
            if cell == "":
                raise MissingValue(f"empty {char} cell in row {row_num}")
            if cell not in schema.level_sets[j]:
                raise LevelSetMismatch(
                    f"external level '{cell}' for {char} in row {row_num} "
                    "not present in the internal schema"
                )
            levels.append(cell)
        group_codes[i] = codes[tuple(levels)]
        for j, cov in enumerate(schema.external_covariates):
            x[i, j] = _parse_float(row[pos[cov]].strip(), cov, row_num)

    return ExternalDataset(schema=schema, group_codes=group_codes, x=x)


def write_internal(ds: AuditDataset, path) -> None:
    """Serialize an AuditDataset back to CSV (round-trips through load_internal)."""
    schema = ds.schema
    groups = schema.all_groups()
    header = (
        list(schema.characteristics)
        + [schema.treatment, schema.outcome, schema.prediction]
        + list(schema.covariates)
    )
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for i in range(ds.n):
            row = list(groups[ds.group_codes[i]].levels)
            row += [str(int(ds.d[i])), str(int(ds.y[i])), str(int(ds.s[i]))]
            row += [repr(float(v)) for v in ds.x[i]]
            writer.writerow(row)


def write_external(ds: ExternalDataset, path) -> None:
    schema = ds.schema
    groups = schema.all_groups()
    header = list(schema.characteristics) + list(schema.external_covariates)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for i in range(ds.n):
            row = list(groups[ds.group_codes[i]].levels)
            row += [repr(float(v)) for v in ds.x[i]]
            writer.writerow(row)


def subgroup_counts(ds: AuditDataset) -> dict[GroupKey, np.ndarray]:
    """Confusion-cell counts per group: a (2, 2, 2) array indexed [d, s, y].

    Every group in the schema gets an entry (all-zero when absent from the
    data); totals over groups and cells equal n.
    """
    counts = {g: np.zeros((2, 2, 2), dtype=np.int64) for g in ds.schema.all_groups()}
    groups = ds.schema.all_groups()
    for i in range(ds.n):
        counts[groups[ds.group_codes[i]]][ds.d[i], ds.s[i], ds.y[i]] += 1
    return counts
