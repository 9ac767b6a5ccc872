"""Loading and validation of synthesis problem instances.

An instance is described by a JSON manifest:

    {
      "inputs": [{"name": "Grades", "path": "grades.csv"}, ...],
      "output": "expected.csv",
      "constants": ["A", 3],
      "aggregators": ["count"],
      "comparison_columns": ["Grade"],
      "foreign_keys": [{"from": "Grades.CourseID", "to": "Courses.CourseID"}],
      "types": {"Grades.CourseID": "int"}
    }

Tables are RFC-4180 CSV files with a header row.  Column types come from the
optional `types` mapping, otherwise from inference over the cell texts with
precedence Integer > Real > DateTime > Boolean > Text; empty cells are null
and do not participate in inference.
"""

from __future__ import annotations

import csv
import datetime
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .relational import (INT64_MAX, INT64_MIN, ColType, Schema, Table,
                         expand_aggregators)


class InstanceError(Exception):
    pass


class ParseError(InstanceError):
    pass


class MissingTable(InstanceError):
    pass


class SchemaError(InstanceError):
    pass


class EmptyOutput(InstanceError):
    pass


@dataclass(frozen=True)
class ForeignKey:
    child_table: str
    child_column: str
    parent_table: str
    parent_column: str


@dataclass
class Instance:
    name: str
    input_tables: dict[str, Table]
    output_table: Table
    constants: list
    aggregators: list[str]
    comparison_columns: list[str]
    foreign_keys: list[ForeignKey] = field(default_factory=list)

    def column_type(self, column: str) -> Optional[ColType]:
        for table in self.input_tables.values():
            if column in table.column_names:
                return table.schema.type_of(column)
        return None


_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")
_DATETIME_RE = re.compile(
    r"^\d{4}-\d{2}-\d{2}[T ]\d{2}:\d{2}(:\d{2}(\.\d+)?)?$")
_INT_RE = re.compile(r"^[+-]?\d+$")


def _parses_int(text: str) -> bool:
    return bool(_INT_RE.match(text)) and INT64_MIN <= int(text) <= INT64_MAX


def _parses_real(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return text.strip().lower() not in ("nan", "inf", "-inf", "+inf", "infinity",
                                        "-infinity")


def _parses_datetime(text: str) -> bool:
    if _DATE_RE.match(text):
        try:
            datetime.date.fromisoformat(text)
            return True
        except ValueError:
            return False
    if _DATETIME_RE.match(text):
        try:
            datetime.datetime.fromisoformat(text.replace(" ", "T"))
            return True
        except ValueError:
            return False
    return False


def infer_types(cells: list[str]) -> ColType:
    """Infer one column type from raw text cells; empty cells are ignored."""
    values = [c for c in cells if c != ""]
    if not values:
        return ColType.TEXT
    if all(_parses_int(v) for v in values):
        return ColType.INT
    if all(_parses_real(v) for v in values):
        return ColType.REAL
    if all(_parses_datetime(v) for v in values):
        return ColType.DATETIME
    if all(v.lower() in ("true", "false") for v in values):
        return ColType.BOOL
    return ColType.TEXT


def _convert(text: str, ctype: ColType):
    if text == "":
        return None
    if ctype is ColType.INT:
        return int(text)
    if ctype is ColType.REAL:
        return float(text)
    if ctype is ColType.BOOL:
        return text.lower() == "true"
    return text


def parse_constant(raw):
    """Tag a manifest constant, parsing strings with the inference order."""
    if raw is None:
        raise ParseError("null constant not allowed")
    if isinstance(raw, bool) or isinstance(raw, (int, float)):
        return raw
    text = str(raw)
    if _parses_int(text):
        return int(text)
    if _parses_real(text):
        return float(text)
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text


def load_table(path: Path, declared: dict[str, ColType] | None = None) -> Table:
    if not path.exists():
        raise MissingTable(f"table file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: missing header row") from None
        rows = [row for row in reader if row]
    if any(not c for c in header):
        raise SchemaError(f"{path}: empty column name in header")
    if len(set(header)) != len(header):
        raise SchemaError(f"{path}: duplicate column names")
    for row in rows:
        if len(row) != len(header):
            raise ParseError(f"{path}: row width {len(row)} != header width "
                             f"{len(header)}: {row!r}")
    declared = declared or {}
    types = []
    for i, name in enumerate(header):
        if name in declared:
            types.append(declared[name])
        else:
            types.append(infer_types([row[i] for row in rows]))
    schema = Schema(tuple(zip(header, types)))
    converted = tuple(
        tuple(_convert(cell, t) for cell, t in zip(row, types))
        for row in rows)
    return Table(schema, converted)


def _parse_fk(entry) -> ForeignKey:
    if isinstance(entry, dict):
        src, dst = entry.get("from"), entry.get("to")
    elif isinstance(entry, (list, tuple)) and len(entry) == 2:
        src, dst = entry
    else:
        raise ParseError(f"bad foreign key entry: {entry!r}")
    try:
        ct, cc = src.split(".", 1)
        pt, pc = dst.split(".", 1)
    except (AttributeError, ValueError):
        raise ParseError(f"foreign key endpoints must be table.column: {entry!r}")
    return ForeignKey(ct, cc, pt, pc)


def table_from_json(columns: list[str], rows: list[list]) -> Table:
    """Build a table from JSON-typed cells (numbers, strings, bools, nulls).

    Native types are respected; string columns are only checked for ISO
    dates, never coerced to numbers.
    """
    if len(set(columns)) != len(columns):
        raise SchemaError(f"duplicate column names: {columns}")
    types: list[ColType] = []
    for i, name in enumerate(columns):
        cells = [row[i] for row in rows if row[i] is not None]
        if not cells:
            types.append(ColType.TEXT)
        elif all(isinstance(c, bool) for c in cells):
            types.append(ColType.BOOL)
        elif all(isinstance(c, int) and not isinstance(c, bool)
                 for c in cells):
            types.append(ColType.INT)
        elif all(isinstance(c, (int, float)) and not isinstance(c, bool)
                 for c in cells):
            types.append(ColType.REAL)
        elif all(isinstance(c, str) for c in cells):
            types.append(ColType.DATETIME if
                         all(_parses_datetime(c) for c in cells)
                         else ColType.TEXT)
        else:
            raise SchemaError(f"column {name!r} mixes incompatible JSON types")
    converted = tuple(
        tuple(float(v) if t is ColType.REAL and isinstance(v, int) else v
              for v, t in zip(row, types))
        for row in rows)
    return Table(Schema(tuple(zip(columns, types))), converted)


def instance_from_dict(payload: dict, name: str = "inline") -> Instance:
    """Build an Instance from an inline JSON payload (tables as
    {columns, rows} objects instead of CSV paths)."""
    inputs: dict[str, Table] = {}
    for entry in payload.get("inputs", []):
        tname = entry.get("name")
        if not tname or "columns" not in entry:
            raise ParseError(f"inline input needs name and columns: {entry!r}")
        if tname in inputs:
            raise ParseError(f"duplicate input table name {tname!r}")
        inputs[tname] = table_from_json(entry["columns"],
                                        entry.get("rows", []))
    if not inputs:
        raise ParseError("no input tables given")
    output_spec = payload.get("output")
    if not output_spec:
        raise ParseError("no output table given")
    output = table_from_json(output_spec["columns"],
                             output_spec.get("rows", []))
    if len(output) == 0:
        raise EmptyOutput("expected output table has no rows")
    constants = [parse_constant(c) for c in payload.get("constants", [])]
    aggregators = expand_aggregators(payload.get("aggregators", []))
    comparison_columns = list(payload.get("comparison_columns", []))
    for col in comparison_columns:
        if not any(col in t.column_names for t in inputs.values()):
            raise SchemaError(f"comparison column {col!r} not in any input table")
    fks = [_parse_fk(e) for e in payload.get("foreign_keys", [])]
    for fk in fks:
        for tname, col in ((fk.child_table, fk.child_column),
                           (fk.parent_table, fk.parent_column)):
            if tname not in inputs or col not in inputs[tname].column_names:
                raise SchemaError(f"foreign key references unknown {tname}.{col}")
    return Instance(
        name=payload.get("name", name),
        input_tables=inputs,
        output_table=output,
        constants=constants,
        aggregators=aggregators,
        comparison_columns=comparison_columns,
        foreign_keys=fks,
    )


def load_instance(manifest_path: str | Path) -> Instance:
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise MissingTable(f"manifest not found: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{manifest_path}: {exc}") from exc
    base = manifest_path.parent

    declared: dict[str, dict[str, ColType]] = {}
    for key, tname in (manifest.get("types") or {}).items():
        try:
            table, column = key.split(".", 1)
        except ValueError:
            raise ParseError(f"types key must be table.column: {key!r}")
        try:
            declared.setdefault(table, {})[column] = ColType(tname)
        except ValueError:
            raise ParseError(f"unknown type tag {tname!r}")

    inputs: dict[str, Table] = {}
    for entry in manifest.get("inputs", []):
        name, rel = entry.get("name"), entry.get("path")
        if not name or not rel:
            raise ParseError(f"input entry needs name and path: {entry!r}")
        if name in inputs:
            raise ParseError(f"duplicate input table name {name!r}")
        inputs[name] = load_table(base / rel, declared.get(name))
    if not inputs:
        raise ParseError("manifest lists no input tables")

    if "output" not in manifest:
        raise ParseError("manifest lists no output table")
    output = load_table(base / manifest["output"], declared.get("output"))
    if len(output) == 0:
        raise EmptyOutput("expected output table has no rows")

    constants = [parse_constant(c) for c in manifest.get("constants", [])]
    aggregators = expand_aggregators(manifest.get("aggregators", []))

    comparison_columns = list(manifest.get("comparison_columns", []))
    for col in comparison_columns:
        if not any(col in t.column_names for t in inputs.values()):
            raise SchemaError(f"comparison column {col!r} not in any input table")

    fks = [_parse_fk(e) for e in manifest.get("foreign_keys", [])]
    for fk in fks:
        for tname, col in ((fk.child_table, fk.child_column),
                           (fk.parent_table, fk.parent_column)):
            if tname not in inputs:
                raise SchemaError(f"foreign key references unknown table {tname!r}")
            if col not in inputs[tname].column_names:
                raise SchemaError(
                    f"foreign key references unknown column {tname}.{col}")

    return Instance(
        name=manifest.get("name", manifest_path.stem),
        input_tables=inputs,
        output_table=output,
        constants=constants,
        aggregators=aggregators,
        comparison_columns=comparison_columns,
        foreign_keys=fks,
    )
