"""Tabular event ingestion and design-matrix construction.

A schema declares the label column with its class vocabulary, the feature
columns (categorical, 0/1 flag, or numeric passthrough), optional row-drop
filters, and optional replacement-level grouping rules that pool rare
categorical levels.  Categorical columns expand to full one-hot blocks with
no dropped reference level (the penalty supplies identifiability); each
block forms a penalty group, flags and ungrouped numeric columns stay
unpenalized.  The fitted column dictionary is serializable so held-out data
can be encoded later without the training table.
"""

from __future__ import annotations

import csv
import json
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from scipy import sparse

from .errors import SchemaError
from .model import Dataset
from .prox import PenaltyGroups

COLUMN_KINDS = ("categorical", "flag", "numeric")
REPLACEMENT_PREFIX = "replacement-level"

# plate-appearance defaults: thresholds are the ranks of the last rostered
# batter and pitcher by appearance count
BATTER_THRESHOLD_RANK = 390
PITCHER_THRESHOLD_RANK = 360
PA_OUTCOMES = ["F", "G", "K", "BB", "HBP", "1B", "2B", "3B", "HR"]


@dataclass
class ColumnSpec:
    name: str
    kind: str
    group: Optional[str] = None

    def __post_init__(self):
        if self.kind not in COLUMN_KINDS:
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "flag" and self.group is not None:
            raise SchemaError(f"flag column {self.name!r} cannot join a penalty group")
        if self.kind == "categorical" and self.group is None:
            self.group = self.name


@dataclass
class ReplacementRule:
    """Pool levels of ``column`` whose row count falls below the rank-k count.

    Pooled levels are relabeled either to the fixed ``label`` or, when
    ``position_column`` is given, to ``"replacement-level <position>"`` using
    the level's first observed position.
    """

    column: str
    threshold_rank: int
    label: Optional[str] = None
    position_column: Optional[str] = None

    def __post_init__(self):
        if self.threshold_rank < 1:
            raise SchemaError("threshold_rank must be at least 1")
        if (self.label is None) == (self.position_column is None):
            raise SchemaError(
                f"replacement rule for {self.column!r} needs exactly one of "
                "'label' or 'position_column'"
            )


@dataclass
class DropRule:
    column: str
    equals: str


@dataclass
class DesignSpec:
    """Declarative description of how a CSV becomes a design matrix."""

    label: str
    classes: List[str]
    columns: List[ColumnSpec]
    replacement: List[ReplacementRule] = field(default_factory=list)
    drop: List[DropRule] = field(default_factory=list)
    auxiliary: List[str] = field(default_factory=list)

    def __post_init__(self):
        if len(self.classes) < 2:
            raise SchemaError("need at least 2 classes")
        if len(set(self.classes)) != len(self.classes):
            raise SchemaError("duplicate class labels")
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names")
        declared = set(names)
        for rule in self.replacement:
            if rule.column not in declared:
                raise SchemaError(f"replacement rule names unknown column {rule.column!r}")

    def required_columns(self, require_label: bool = True) -> List[str]:
        needed = [c.name for c in self.columns]
        for rule in self.replacement:
            if rule.position_column and rule.position_column not in needed:
                needed.append(rule.position_column)
        for name in self.auxiliary:
            if name not in needed:
                needed.append(name)
        if require_label:
            needed.append(self.label)
        return needed

    @classmethod
    def from_dict(cls, raw: dict) -> "DesignSpec":
        try:
            columns = [ColumnSpec(name=c["name"], kind=c.get("kind", c.get("type")),
                                  group=c.get("group"))
                       for c in raw["columns"]]
            replacement = [ReplacementRule(column=r["column"],
                                           threshold_rank=int(r["threshold_rank"]),
                                           label=r.get("label"),
                                           position_column=r.get("position_column"))
                           for r in raw.get("replacement", [])]
            drop = [DropRule(column=d["column"], equals=str(d["equals"]))
                    for d in raw.get("drop", [])]
            return cls(label=raw["label"], classes=list(raw["classes"]),
                       columns=columns, replacement=replacement, drop=drop,
                       auxiliary=list(raw.get("auxiliary", [])))
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed schema: {exc}") from exc

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "classes": list(self.classes),
            "columns": [
                {"name": c.name, "kind": c.kind,
                 **({"group": c.group} if c.group else {})}
                for c in self.columns
            ],
            "replacement": [
                {"column": r.column, "threshold_rank": r.threshold_rank,
                 **({"label": r.label} if r.label else {}),
                 **({"position_column": r.position_column} if r.position_column else {})}
                for r in self.replacement
            ],
            "drop": [{"column": d.column, "equals": d.equals} for d in self.drop],
            "auxiliary": list(self.auxiliary),
        }

    @classmethod
    def from_json_file(cls, path) -> "DesignSpec":
        with open(path, encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"schema file is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)


def default_baseball_spec() -> DesignSpec:
    """Plate-appearance schema: batter/pitcher/stadium blocks plus two flags."""
    return DesignSpec(
        label="outcome",
        classes=list(PA_OUTCOMES),
        columns=[
            ColumnSpec("batter_id", "categorical", group="batter"),
            ColumnSpec("pitcher_id", "categorical", group="pitcher"),
            ColumnSpec("stadium_id", "categorical", group="stadium"),
            ColumnSpec("home", "flag"),
            ColumnSpec("opposite_hand", "flag"),
        ],
        replacement=[
            ReplacementRule("batter_id", BATTER_THRESHOLD_RANK,
                            position_column="batter_position"),
            ReplacementRule("pitcher_id", PITCHER_THRESHOLD_RANK,
                            label=f"{REPLACEMENT_PREFIX} pitcher"),
        ],
        auxiliary=["batter_position"],
    )


@dataclass
class EventTable:
    """Column-major table of raw string values."""

    columns: Dict[str, List[str]]
    column_order: List[str]

    def __post_init__(self):
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise ValueError("ragged table: columns differ in length")

    @property
    def n_rows(self) -> int:
        if not self.columns:
            return 0
        return len(next(iter(self.columns.values())))

    def column(self, name: str) -> List[str]:
        try:
            return self.columns[name]
        except KeyError:
            raise SchemaError(f"table has no column {name!r}") from None

    def take(self, rows: List[int]) -> "EventTable":
        return EventTable(
            columns={k: [v[i] for i in rows] for k, v in self.columns.items()},
            column_order=list(self.column_order),
        )


def load_csv(path, spec: DesignSpec, require_label: bool = True) -> EventTable:
    """Read and validate a UTF-8 CSV against ``spec``.

    All columns present in the file are kept (undeclared ones ride along for
    round-tripping); flags must be literal 0/1 and numeric columns must
    parse, reported with 1-based file line numbers.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: file is empty, expected a header row") from None
        if len(set(header)) != len(header):
            raise SchemaError(f"{path}: duplicate column in header")
        missing = [c for c in spec.required_columns(require_label) if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing required column(s): {', '.join(missing)}")
        columns: Dict[str, List[str]] = {name: [] for name in header}
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise SchemaError(
                    f"{path}: line {line_no}: expected {len(header)} fields, got {len(row)}"
                )
            for name, value in zip(header, row):
                columns[name].append(value)

    table = EventTable(columns=columns, column_order=list(header))
    flag_cols = [c.name for c in spec.columns if c.kind == "flag"]
    numeric_cols = [c.name for c in spec.columns if c.kind == "numeric"]
    for name in flag_cols:
        for i, value in enumerate(table.columns[name]):
            if value not in ("0", "1"):
                raise SchemaError(
                    f"{path}: line {i + 2}: flag column {name!r} must be 0 or 1, "
                    f"got {value!r}"
                )
    for name in numeric_cols:
        for i, value in enumerate(table.columns[name]):
            try:
                float(value)
            except ValueError:
                raise SchemaError(
                    f"{path}: line {i + 2}: numeric column {name!r} cannot parse "
                    f"{value!r}"
                ) from None
    return table


def save_csv(table: EventTable, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(table.column_order)
        cols = [table.columns[name] for name in table.column_order]
        for i in range(table.n_rows):
            writer.writerow([col[i] for col in cols])


def apply_drop_rules(table: EventTable, spec: DesignSpec) -> EventTable:
    """Remove rows matched by any of the schema's drop filters."""
    if not spec.drop:
        return table
    keep = []
    for i in range(table.n_rows):
        if not any(table.column(rule.column)[i] == rule.equals for rule in spec.drop):
            keep.append(i)
    return table.take(keep)


def replacement_mapping(table: EventTable, rule: ReplacementRule) -> Dict[str, str]:
    """Levels of the rule's column mapped to their replacement labels.

    The threshold is the row count of the rank-k level; levels tied with it
    stay above the line.  Already-pooled levels (the replacement prefix) are
    exempt from both the ranking and the relabeling, which makes the
    transform idempotent.
    """
    values = table.column(rule.column)
    counts = Counter(v for v in values if not v.startswith(REPLACEMENT_PREFIX))
    if len(counts) < rule.threshold_rank:
        warnings.warn(
            f"column {rule.column!r} has {len(counts)} distinct levels, fewer than "
            f"threshold rank {rule.threshold_rank}; keeping all levels",
            stacklevel=2,
        )
        return {}
    threshold = sorted(counts.values(), reverse=True)[rule.threshold_rank - 1]
    below = [level for level, c in counts.items() if c < threshold]
    if rule.label is not None:
        return {level: rule.label for level in below}
    positions = table.column(rule.position_column)
    first_position: Dict[str, str] = {}
    for level, pos in zip(values, positions):
        if level not in first_position:
            first_position[level] = pos
    return {level: f"{REPLACEMENT_PREFIX} {first_position[level]}" for level in below}


def _relabel_column(table: EventTable, column: str, mapping: Dict[str, str]) -> EventTable:
    columns = {k: list(v) for k, v in table.columns.items()}
    columns[column] = [mapping.get(v, v) for v in columns[column]]
    return EventTable(columns=columns, column_order=list(table.column_order))


def apply_replacement_grouping(table: EventTable, spec: DesignSpec) -> EventTable:
    """Relabel below-threshold levels per the schema's replacement rules."""
    for rule in spec.replacement:
        mapping = replacement_mapping(table, rule)
        if mapping:
            table = _relabel_column(table, rule.column, mapping)
    return table


class DesignEncoder:
    """Fitted column dictionary: raw table -> design matrix.

    Holds, per categorical column, the ordered level list learned from the
    training table, plus the training-time replacement relabeling so unseen
    or pooled levels map to the matching replacement column at encode time.
    """

    def __init__(self, spec: DesignSpec, levels: Dict[str, List[str]],
                 relabel: Dict[str, Dict[str, str]]):
        self.spec = spec
        self.levels = levels
        self.relabel = relabel
        self.feature_names: List[str] = []
        self._offsets: Dict[str, int] = {}
        self._level_index: Dict[str, Dict[str, int]] = {}
        groups: Dict[str, List[int]] = {}
        unpenalized: List[int] = []
        for col in spec.columns:
            self._offsets[col.name] = len(self.feature_names)
            if col.kind == "categorical":
                index = {level: i for i, level in enumerate(levels[col.name])}
                self._level_index[col.name] = index
                start = len(self.feature_names)
                self.feature_names.extend(f"{col.name}:{lv}" for lv in levels[col.name])
                groups.setdefault(col.group, []).extend(
                    range(start, start + len(index)))
            else:
                pos = len(self.feature_names)
                self.feature_names.append(col.name)
                if col.group is not None:
                    groups.setdefault(col.group, []).append(pos)
                else:
                    unpenalized.append(pos)
        self.groups = PenaltyGroups(
            groups={name: np.array(idx, dtype=int) for name, idx in groups.items()},
            unpenalized=np.array(unpenalized, dtype=int),
        ) if groups else PenaltyGroups(groups={}, unpenalized=np.arange(len(self.feature_names)))

    @property
    def p(self) -> int:
        return len(self.feature_names)

    @classmethod
    def fit(cls, table: EventTable, spec: DesignSpec,
            relabel: Optional[Dict[str, Dict[str, str]]] = None) -> "DesignEncoder":
        levels = {}
        for col in spec.columns:
            if col.kind == "categorical":
                levels[col.name] = sorted(set(table.column(col.name)))
        return cls(spec, levels, relabel or {})

    def _categorical_index(self, col_name: str, value: str, row: int,
                           table: EventTable) -> int:
        index = self._level_index[col_name]
        if value in index:
            return index[value]
        relabeled = self.relabel.get(col_name, {}).get(value)
        if relabeled is not None and relabeled in index:
            return index[relabeled]
        rule = next((r for r in self.spec.replacement if r.column == col_name), None)
        if rule is not None:
            if rule.label is not None and rule.label in index:
                return index[rule.label]
            if rule.position_column is not None:
                pos = table.column(rule.position_column)[row]
                fallback = f"{REPLACEMENT_PREFIX} {pos}"
                if fallback in index:
                    return index[fallback]
        raise ValueError(
            f"row {row + 1}: column {col_name!r} has unseen level {value!r} "
            "with no replacement mapping"
        )

    def transform(self, table: EventTable, require_label: bool = True):
        """Encode a table against the fitted dictionary.

        Returns ``(X, y)``; ``y`` is None when the label column is absent and
        not required.  X is CSR when any categorical block exists, dense
        otherwise.
        """
        n = table.n_rows
        cat_cols = [c for c in self.spec.columns if c.kind == "categorical"]
        dense_cols = [c for c in self.spec.columns if c.kind != "categorical"]

        if cat_cols:
            rows, cols, data = [], [], []
            for col in cat_cols:
                offset = self._offsets[col.name]
                values = table.column(col.name)
                for i in range(n):
                    rows.append(i)
                    cols.append(offset + self._categorical_index(col.name, values[i], i, table))
                    data.append(1.0)
            for col in dense_cols:
                offset = self._offsets[col.name]
                values = table.column(col.name)
                for i in range(n):
                    v = float(values[i])
                    if v != 0.0:
                        rows.append(i)
                        cols.append(offset)
                        data.append(v)
            X = sparse.coo_matrix((data, (rows, cols)), shape=(n, self.p)).tocsr()
        else:
            X = np.zeros((n, self.p))
            for col in dense_cols:
                X[:, self._offsets[col.name]] = [float(v) for v in table.column(col.name)]

        y = None
        if require_label or self.spec.label in table.columns:
            labels = table.column(self.spec.label)
            class_index = {c: k + 1 for k, c in enumerate(self.spec.classes)}
            y = np.empty(n, dtype=int)
            for i, value in enumerate(labels):
                try:
                    y[i] = class_index[value]
                except KeyError:
                    raise ValueError(
                        f"row {i + 1}: unknown outcome label {value!r}"
                    ) from None
        return X, y

    def to_dataset(self, table: EventTable) -> Dataset:
        X, y = self.transform(table, require_label=True)
        return Dataset(X=X, y=y, K=len(self.spec.classes),
                       feature_names=list(self.feature_names),
                       class_names=list(self.spec.classes))

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "levels": {k: list(v) for k, v in self.levels.items()},
            "relabel": {k: dict(v) for k, v in self.relabel.items()},
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "DesignEncoder":
        return cls(DesignSpec.from_dict(raw["spec"]),
                   {k: list(v) for k, v in raw["levels"].items()},
                   {k: dict(v) for k, v in raw.get("relabel", {}).items()})


def build_design(table: EventTable, spec: DesignSpec):
    """One-hot encode a (preprocessed) table.

    Returns ``(dataset, groups, encoder)``: the encoded dataset, the penalty
    groups induced by the schema, and the fitted encoder for later
    test-time transforms.
    """
    if table.n_rows == 0:
        raise ValueError("table is empty after preprocessing")
    encoder = DesignEncoder.fit(table, spec)
    return encoder.to_dataset(table), encoder.groups, encoder


def prepare_training_design(table: EventTable, spec: DesignSpec):
    """Full training pipeline: drop rules, replacement grouping, encoding.

    The replacement relabeling learned here is stored on the encoder so
    held-out tables can map pooled or unseen levels consistently.
    """
    table = apply_drop_rules(table, spec)
    relabel: Dict[str, Dict[str, str]] = {}
    for rule in spec.replacement:
        mapping = replacement_mapping(table, rule)
        if mapping:
            relabel[rule.column] = mapping
            table = _relabel_column(table, rule.column, mapping)
    if table.n_rows == 0:
        raise ValueError("table is empty after preprocessing")
    encoder = DesignEncoder.fit(table, spec, relabel=relabel)
    return encoder.to_dataset(table), encoder.groups, encoder
