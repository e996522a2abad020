"""Formulation records, CSV ingestion, categorical encoding and min-max scaling."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

NUMERIC = "numeric"
CATEGORICAL = "categorical"

OFDF = "ofdf"
SRMT = "srmt"
TASK_KINDS = (OFDF, SRMT)

# inclusive physical bounds on target values per task
TARGET_BOUNDS = {OFDF: (0.0, 200.0), SRMT: (0.0, 100.0)}


class FormpredError(Exception):
    """Base class for data errors raised by this package."""


class SchemaError(FormpredError, ValueError):
    pass


class ParseError(FormpredError, ValueError):
    pass


class IntegrityError(FormpredError, ValueError):
    pass


class UnknownCategoryError(FormpredError, KeyError):
    def __init__(self, column: str, label: str):
        super().__init__(f"unknown category {label!r} in column {column!r}")
        self.column = column
        self.label = label

    def __str__(self) -> str:
        return self.args[0]


@dataclass(frozen=True)
class DescriptorSet:
    """The nine molecular descriptors used to represent an API."""

    molecular_weight: float
    xlogp3: float
    h_bond_donors: int
    h_bond_acceptors: int
    rotatable_bonds: int
    topological_polar_surface_area: float
    heavy_atom_count: int
    complexity: float
    log_s: float

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not math.isfinite(value):
                raise ValueError(f"descriptor {f.name} is not finite: {value}")
            if f.type in ("int", int):
                if value < 0 or value != int(value):
                    raise ValueError(f"descriptor {f.name} must be a non-negative integer, got {value}")

    @classmethod
    def names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    @classmethod
    def from_mapping(cls, values: Mapping[str, float]) -> "DescriptorSet":
        kwargs = {}
        for f in fields(cls):
            v = values[f.name]
            kwargs[f.name] = int(v) if f.type in ("int", int) and float(v).is_integer() else v
        return cls(**kwargs)

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


DESCRIPTOR_NAMES = DescriptorSet.names()


@dataclass(frozen=True)
class FeatureColumn:
    name: str
    kind: str = NUMERIC

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise SchemaError(f"feature {self.name!r}: unknown kind {self.kind!r}")


@dataclass(frozen=True)
class DatasetSchema:
    features: tuple[FeatureColumn, ...]
    targets: tuple[str, ...]
    group: str
    task_kind: str
    id_column: str = "record_id"

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "task_kind", self.task_kind.lower())
        if self.task_kind not in TASK_KINDS:
            raise SchemaError(f"unknown task_kind {self.task_kind!r}; expected one of {TASK_KINDS}")
        if not self.features:
            raise SchemaError("schema needs at least one feature column")
        if not self.targets:
            raise SchemaError("schema needs at least one target column")
        names = [self.id_column, self.group, *self.feature_names, *self.targets]
        seen = set()
        for name in names:
            if name in seen:
                raise SchemaError(f"column {name!r} appears in more than one role")
            seen.add(name)

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    @property
    def numeric_features(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features if f.kind == NUMERIC)

    @property
    def categorical_features(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features if f.kind == CATEGORICAL)

    @property
    def columns(self) -> tuple[str, ...]:
        return (self.id_column, self.group, *self.feature_names, *self.targets)

    def to_dict(self) -> dict:
        return {
            "features": [{"name": f.name, "kind": f.kind} for f in self.features],
            "targets": list(self.targets),
            "group": self.group,
            "task_kind": self.task_kind,
            "id": self.id_column,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "DatasetSchema":
        try:
            features = tuple(
                FeatureColumn(f["name"], f.get("kind", NUMERIC)) if isinstance(f, Mapping) else FeatureColumn(f)
                for f in d["features"]
            )
            return cls(features, tuple(d["targets"]), d["group"], d["task_kind"], d.get("id", "record_id"))
        except KeyError as exc:
            raise SchemaError(f"schema document is missing key {exc.args[0]!r}") from None

    @classmethod
    def load(cls, path: str | Path) -> "DatasetSchema":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class FormulationRecord:
    record_id: str
    group_id: str
    categoricals: Mapping[str, str]
    numerics: Mapping[str, float]
    targets: tuple[float, ...]


@dataclass(frozen=True)
class CategoryCodes:
    """Per-column label -> integer code tables. Code 0 is the empty label."""

    tables: Mapping[str, Mapping[str, int]]
    one_hot: bool = False

    def code(self, column: str, label: str) -> int:
        if label == "":
            return 0
        try:
            return self.tables[column][label]
        except KeyError:
            raise UnknownCategoryError(column, label) from None

    def width(self, column: str) -> int:
        return len(self.tables[column]) if self.one_hot else 1

    def to_dict(self) -> dict:
        return {"one_hot": self.one_hot, "tables": {c: dict(t) for c, t in self.tables.items()}}

    @classmethod
    def from_dict(cls, d: Mapping) -> "CategoryCodes":
        return cls({c: dict(t) for c, t in d["tables"].items()}, bool(d.get("one_hot", False)))


@dataclass(frozen=True)
class ScalingParams:
    feature_names: tuple[str, ...]
    feature_min: np.ndarray
    feature_max: np.ndarray
    target_names: tuple[str, ...]
    target_min: np.ndarray
    target_max: np.ndarray

    @property
    def constant_features(self) -> np.ndarray:
        return self.feature_max == self.feature_min

    @property
    def constant_targets(self) -> np.ndarray:
        return self.target_max == self.target_min

    def scale_features(self, X: np.ndarray) -> np.ndarray:
        return _minmax(np.asarray(X, dtype=float), self.feature_min, self.feature_max)

    def scale_targets(self, Y: np.ndarray) -> np.ndarray:
        return _minmax(np.asarray(Y, dtype=float), self.target_min, self.target_max)

    def invert_targets(self, Y: np.ndarray) -> np.ndarray:
        Y = np.asarray(Y, dtype=float)
        return Y * (self.target_max - self.target_min) + self.target_min

    def to_dict(self) -> dict:
        return {
            "features": {"names": list(self.feature_names), "min": self.feature_min.tolist(),
                         "max": self.feature_max.tolist()},
            "targets": {"names": list(self.target_names), "min": self.target_min.tolist(),
                        "max": self.target_max.tolist()},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ScalingParams":
        f, t = d["features"], d["targets"]
        return cls(tuple(f["names"]), np.asarray(f["min"], float), np.asarray(f["max"], float),
                   tuple(t["names"]), np.asarray(t["min"], float), np.asarray(t["max"], float))


def _minmax(X: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    span = hi - lo
    constant = span == 0
    out = (X - lo) / np.where(constant, 1.0, span)
    # no clipping: held-out rows may legitimately fall outside [0, 1]
    return np.where(constant, 0.0, out)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable record collection. ``matrix`` is set once categoricals are encoded."""

    schema: DatasetSchema
    records: tuple[FormulationRecord, ...]
    codes: CategoryCodes | None = None
    matrix: np.ndarray | None = None
    feature_names: tuple[str, ...] = ()
    scaling: ScalingParams | None = None
    group_index: Mapping[str, tuple[int, ...]] = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        groups: dict[str, list[int]] = {}
        for i, rec in enumerate(self.records):
            groups.setdefault(rec.group_id, []).append(i)
        object.__setattr__(self, "group_index", {g: tuple(ix) for g, ix in groups.items()})
        if self.matrix is not None:
            m = np.array(self.matrix, dtype=float)
            m.setflags(write=False)
            object.__setattr__(self, "matrix", m)
            if m.shape != (len(self.records), len(self.feature_names)):
                raise SchemaError(f"matrix shape {m.shape} does not match "
                                  f"{len(self.records)} records x {len(self.feature_names)} features")

    @classmethod
    def from_records(cls, schema: DatasetSchema, records: Iterable[FormulationRecord]) -> "Dataset":
        records = tuple(records)
        lo, hi = TARGET_BOUNDS[schema.task_kind]
        seen = set()
        for rec in records:
            if rec.record_id in seen:
                raise IntegrityError(f"duplicate record_id {rec.record_id!r}")
            seen.add(rec.record_id)
            if len(rec.targets) != len(schema.targets):
                raise IntegrityError(f"record {rec.record_id!r}: expected {len(schema.targets)} targets, "
                                     f"got {len(rec.targets)}")
            for name, value in zip(schema.targets, rec.targets):
                if math.isnan(value):  # unlabeled prediction input
                    continue
                if not (lo <= value <= hi):
                    raise IntegrityError(f"record {rec.record_id!r}: target {name}={value} outside [{lo}, {hi}]")
            for name in schema.numeric_features:
                if name not in rec.numerics:
                    raise IntegrityError(f"record {rec.record_id!r}: missing numeric feature {name!r}")
                if not math.isfinite(rec.numerics[name]):
                    raise IntegrityError(f"record {rec.record_id!r}: feature {name!r} is not finite")
            for name in schema.categorical_features:
                if name not in rec.categoricals:
                    raise IntegrityError(f"record {rec.record_id!r}: missing categorical feature {name!r}")
        return cls(schema, records)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def record_ids(self) -> tuple[str, ...]:
        return tuple(r.record_id for r in self.records)

    @property
    def groups(self) -> tuple[str, ...]:
        return tuple(r.group_id for r in self.records)

    @property
    def targets(self) -> np.ndarray:
        return np.array([r.targets for r in self.records], dtype=float).reshape(len(self.records), -1)

    @property
    def encoded(self) -> np.ndarray:
        if self.matrix is None:
            raise ValueError("dataset has not been encoded; call encode_categoricals first")
        return self.matrix

    def index_of(self, record_id: str) -> int:
        try:
            return self.record_ids.index(record_id)
        except ValueError:
            raise KeyError(f"unknown record_id {record_id!r}") from None

    def subset(self, indices: Sequence[int]) -> "Dataset":
        indices = list(indices)
        matrix = None if self.matrix is None else self.matrix[indices]
        return Dataset(self.schema, [self.records[i] for i in indices], self.codes, matrix,
                       self.feature_names, self.scaling)


def _parse_float(token: str, column: str, line: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"line {line}: column {column!r}: cannot parse {token!r} as a number") from None
    if not math.isfinite(value):
        raise ParseError(f"line {line}: column {column!r}: non-finite value {token!r}")
    return value


def load_csv(path: str | Path, schema: DatasetSchema, require_targets: bool = True) -> Dataset:
    """Read a UTF-8 comma-separated file whose header names every schema column.

    Extra columns are ignored. Line numbers in errors count the header as line 1.
    With ``require_targets=False`` a file lacking all target columns loads
    with NaN targets (prediction input).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        unlabeled = not require_targets and not any(t in header for t in schema.targets)
        required = schema.columns[:-len(schema.targets)] if unlabeled else schema.columns
        for col in required:
            if col not in header:
                raise SchemaError(f"{path}: missing column {col!r}")
        pos = {name: header.index(name) for name in required}
        records = []
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"line {line}: expected {len(header)} fields, got {len(row)}")
            numerics = {}
            for name in schema.numeric_features:
                token = row[pos[name]].strip()
                if token == "":
                    raise ParseError(f"line {line}: column {name!r} is empty (missing values are not imputed)")
                numerics[name] = _parse_float(token, name, line)
            categoricals = {name: row[pos[name]].strip() for name in schema.categorical_features}
            if unlabeled:
                targets = (math.nan,) * len(schema.targets)
            else:
                targets = tuple(_parse_float(row[pos[t]].strip(), t, line) for t in schema.targets)
            records.append(FormulationRecord(row[pos[schema.id_column]].strip(), row[pos[schema.group]].strip(),
                                             categoricals, numerics, targets))
    return Dataset.from_records(schema, records)


def _fmt(value: float) -> str:
    return repr(float(value))


def write_csv(ds: Dataset, path: str | Path) -> None:
    schema = ds.schema
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(schema.columns)
        for rec in ds.records:
            row = [rec.record_id, rec.group_id]
            for col in schema.features:
                row.append(rec.categoricals[col.name] if col.kind == CATEGORICAL else _fmt(rec.numerics[col.name]))
            row.extend(_fmt(v) for v in rec.targets)
            writer.writerow(row)


def fit_codes(ds: Dataset, one_hot: bool = False) -> CategoryCodes:
    tables = {}
    for col in ds.schema.categorical_features:
        labels = sorted({r.categoricals[col] for r in ds.records} - {""})
        tables[col] = {label: i for i, label in enumerate(labels, start=1)}
    return CategoryCodes(tables, one_hot)


def encode_categoricals(ds: Dataset, codes: CategoryCodes | None = None, one_hot: bool = False) -> Dataset:
    """Build the numeric feature matrix.

    Labels get codes 1..K in sorted order per column; the empty label is 0.
    Pass ``codes`` from a fitted model to reuse its tables at prediction time.
    """
    if codes is None:
        codes = fit_codes(ds, one_hot)
    names: list[str] = []
    for col in ds.schema.features:
        if col.kind == CATEGORICAL and codes.one_hot:
            names.extend(f"{col.name}={label}" for label in codes.tables[col.name])
        else:
            names.append(col.name)
    matrix = np.zeros((len(ds), len(names)))
    for i, rec in enumerate(ds.records):
        j = 0
        for col in ds.schema.features:
            if col.kind == NUMERIC:
                matrix[i, j] = rec.numerics[col.name]
                j += 1
                continue
            code = codes.code(col.name, rec.categoricals[col.name])
            if codes.one_hot:
                if code:
                    matrix[i, j + code - 1] = 1.0
                j += codes.width(col.name)
            else:
                matrix[i, j] = code
                j += 1
    return Dataset(ds.schema, ds.records, codes, matrix, tuple(names))


def fit_scaling(ds: Dataset, train_indices: Sequence[int]) -> ScalingParams:
    """Min-max parameters from the training rows only.

    Dissolution targets (percent) use the fixed (0, 100) range; other targets
    use the training min/max.
    """
    idx = np.asarray(list(train_indices), dtype=int)
    if idx.size == 0:
        raise ValueError("train_indices is empty")
    if idx.min() < 0 or idx.max() >= len(ds):
        raise ValueError("train_indices out of bounds")
    X = ds.encoded[idx]
    Y = ds.targets[idx]
    if ds.schema.task_kind == SRMT:
        tmin, tmax = np.zeros(Y.shape[1]), np.full(Y.shape[1], 100.0)
    else:
        tmin, tmax = Y.min(axis=0), Y.max(axis=0)
    return ScalingParams(ds.feature_names, X.min(axis=0), X.max(axis=0), ds.schema.targets, tmin, tmax)


def apply_scaling(ds: Dataset, p: ScalingParams) -> Dataset:
    if tuple(ds.feature_names) != tuple(p.feature_names):
        raise SchemaError(f"feature columns {ds.feature_names} do not match fitted columns {p.feature_names}")
    if tuple(ds.schema.targets) != tuple(p.target_names):
        raise SchemaError(f"target columns {ds.schema.targets} do not match fitted columns {p.target_names}")
    return Dataset(ds.schema, ds.records, ds.codes, p.scale_features(ds.encoded), ds.feature_names, p)


def invert_target_scaling(values, p: ScalingParams) -> np.ndarray:
    return p.invert_targets(values)
