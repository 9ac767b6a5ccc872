"""In-memory relational engine with multiset semantics.

Tables are immutable: a schema (ordered, typed columns) plus a tuple of rows.
Cells are plain Python values (int, float, str, bool, None); the column type
tag says how to interpret them.  Datetime cells are ISO-8601 strings, whose
lexicographic order is chronological.

Two comparison regimes are provided: strict (names + row multisets) and lax
(ignores column names/order and coerces numeric-looking cells).  All
operations are pure; row order in results is deterministic (left-major join
order, first-occurrence group order) and is the order window functions see.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

from . import dsl
from .dsl import (FilterCondition, JoinCondition, Line, SummariseCondition,
                  ColumnRef)

INT64_MIN = -(2 ** 63)
INT64_MAX = 2 ** 63 - 1


class EngineError(Exception):
    """Base class for relational engine errors."""


class UnknownColumn(EngineError):
    pass


class TypeMismatch(EngineError):
    pass


class NonUnionCompatible(EngineError):
    pass


class ArityError(EngineError):
    pass


class ColType(str, Enum):
    INT = "int"
    REAL = "real"
    TEXT = "text"
    BOOL = "bool"
    DATETIME = "datetime"


NUMERIC_TYPES = frozenset({ColType.INT, ColType.REAL})
ORDERED_TYPES = frozenset({ColType.INT, ColType.REAL, ColType.TEXT, ColType.DATETIME})


@dataclass(frozen=True)
class Schema:
    columns: tuple[tuple[str, ColType], ...]

    def __post_init__(self):
        names = [c for c, _ in self.columns]
        if len(set(names)) != len(names):
            raise TypeMismatch(f"duplicate column names in schema: {names}")
        for name in names:
            if not name or not isinstance(name, str):
                raise TypeMismatch(f"bad column name: {name!r}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c for c, _ in self.columns)

    @property
    def types(self) -> tuple[ColType, ...]:
        return tuple(t for _, t in self.columns)

    def index_of(self, name: str) -> int:
        for i, (c, _) in enumerate(self.columns):
            if c == name:
                return i
        raise UnknownColumn(f"column {name!r} not in {self.names}")

    def type_of(self, name: str) -> ColType:
        return self.columns[self.index_of(name)][1]

    def __len__(self) -> int:
        return len(self.columns)


def _check_cell(value, ctype: ColType, column: str):
    if value is None:
        return None
    if ctype is ColType.INT:
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeMismatch(f"column {column!r}: {value!r} is not an integer")
        if not INT64_MIN <= value <= INT64_MAX:
            raise TypeMismatch(f"column {column!r}: {value!r} out of 64-bit range")
        return value
    if ctype is ColType.REAL:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TypeMismatch(f"column {column!r}: {value!r} is not numeric")
        return float(value)
    if ctype in (ColType.TEXT, ColType.DATETIME):
        if not isinstance(value, str):
            raise TypeMismatch(f"column {column!r}: {value!r} is not text")
        return value
    if ctype is ColType.BOOL:
        if not isinstance(value, bool):
            raise TypeMismatch(f"column {column!r}: {value!r} is not boolean")
        return value
    raise TypeMismatch(f"unknown column type {ctype!r}")


@dataclass(frozen=True)
class Table:
    schema: Schema
    rows: tuple[tuple, ...]

    def __post_init__(self):
        width = len(self.schema)
        checked = []
        for row in self.rows:
            if len(row) != width:
                raise ArityError(f"row {row!r} does not match schema width {width}")
            checked.append(tuple(
                _check_cell(v, t, c)
                for v, (c, t) in zip(row, self.schema.columns)
            ))
        object.__setattr__(self, "rows", tuple(checked))

    @classmethod
    def from_rows(cls, columns: Sequence[tuple[str, ColType]],
                  rows: Iterable[Sequence]) -> "Table":
        return cls(Schema(tuple(columns)), tuple(tuple(r) for r in rows))

    @property
    def column_names(self) -> tuple[str, ...]:
        return self.schema.names

    def column(self, name: str) -> list:
        i = self.schema.index_of(name)
        return [row[i] for row in self.rows]

    def __len__(self) -> int:
        return len(self.rows)


# ---------------------------------------------------------------------------
# Value comparison and canonical forms
# ---------------------------------------------------------------------------

_INT_RE = re.compile(r"^[+-]?\d+$")


def lax_canonical(value):
    """Coerce a cell for lax comparison: bools to ints, numeric text to
    numbers, whole floats to ints."""
    if value is None:
        return None
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        if math.isfinite(value) and value.is_integer():
            return int(value)
        return value
    if isinstance(value, str):
        s = value.strip()
        if _INT_RE.match(s):
            return int(s)
        try:
            f = float(s)
        except ValueError:
            return value
        if math.isfinite(f):
            return int(f) if f.is_integer() else f
        return value
    return value


def cell_sort_key(value):
    if value is None:
        return (0, "", "")
    if isinstance(value, bool):
        return (1, float(value), str(int(value)))
    if isinstance(value, (int, float)):
        return (1, float(value), str(value))
    return (2, value, "")


def row_sort_key(row):
    return tuple(cell_sort_key(v) for v in row)


def _compare_cells(a, b, op: str) -> bool:
    """Evaluate one comparison atom; None never satisfies (unknown -> false)."""
    if a is None or b is None:
        return False
    a_num = isinstance(a, (int, float))
    b_num = isinstance(b, (int, float))
    if a_num != b_num:
        raise TypeMismatch(f"cannot compare {a!r} with {b!r}")
    if op == "==":
        return a == b
    if op == "!=":
        return a != b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    raise TypeMismatch(f"unknown comparator {op!r}")


# ---------------------------------------------------------------------------
# Aggregate and window functions
# ---------------------------------------------------------------------------

REDUCING_FNS = ("n", "n_distinct", "sum", "mean", "min", "max", "str_count",
                "median", "mode")
WINDOW_FNS = ("cumsum", "pmin", "pmax", "lead", "lag", "rank", "row_number")
ZERO_ARG_FNS = frozenset({"n", "row_number"})
AGGREGATE_ALIASES = {"count": ("n", "n_distinct"), "avg": ("mean",)}


def expand_aggregators(names: Iterable[str]) -> list[str]:
    """Expand user-facing aliases, preserving order and dropping duplicates."""
    out: list[str] = []
    for name in names:
        for fn in AGGREGATE_ALIASES.get(name, (name,)):
            if fn not in out:
                out.append(fn)
    return out


def aggregate_result_type(fn: str, col_type: Optional[ColType]) -> Optional[ColType]:
    """Result type of `fn` over a column of `col_type`; None if inapplicable.

    Zero-argument functions take col_type None.
    """
    if fn in ZERO_ARG_FNS:
        return ColType.INT if col_type is None else None
    if col_type is None:
        return None
    if fn == "n_distinct":
        return ColType.INT
    if fn in ("sum", "cumsum"):
        return col_type if col_type in NUMERIC_TYPES else None
    if fn in ("mean", "median"):
        return ColType.REAL if col_type in NUMERIC_TYPES else None
    if fn in ("min", "max", "pmin", "pmax"):
        return col_type if col_type in ORDERED_TYPES else None
    if fn == "str_count":
        return ColType.INT if col_type is ColType.TEXT else None
    if fn == "mode":
        return col_type
    if fn in ("lead", "lag"):
        return col_type
    if fn == "rank":
        return ColType.INT if col_type in ORDERED_TYPES else None
    return None


def is_window_fn(fn: str) -> bool:
    return fn in WINDOW_FNS


def _reduce(fn: str, n_rows: int, cells: Optional[list]):
    """SQL-style reduction: nulls are skipped, empty input yields null
    (except counts)."""
    if fn == "n":
        return n_rows
    values = [v for v in cells if v is not None]
    if fn == "n_distinct":
        return len(set(values))
    if not values:
        return None
    if fn == "sum":
        return sum(values)
    if fn == "mean":
        return sum(values) / len(values)
    if fn == "min":
        return min(values)
    if fn == "max":
        return max(values)
    if fn == "str_count":
        return sum(len(v) for v in values)
    if fn == "median":
        ordered = sorted(values)
        mid = len(ordered) // 2
        if len(ordered) % 2:
            return float(ordered[mid])
        return (ordered[mid - 1] + ordered[mid]) / 2
    if fn == "mode":
        counts = Counter(values)
        best = max(counts.values())
        return min((v for v, c in counts.items() if c == best), key=cell_sort_key)
    raise TypeMismatch(f"unknown aggregate {fn!r}")


def _window(fn: str, cells: Optional[list], n_rows: int) -> list:
    if fn == "row_number":
        return list(range(1, n_rows + 1))
    if fn == "lead":
        return list(cells[1:]) + [None]
    if fn == "lag":
        return [None] + list(cells[:-1])
    if fn == "rank":
        keys = [cell_sort_key(v) for v in cells]
        return [1 + sum(1 for other in keys if other < k) for k in keys]
    out = []
    acc = None
    for v in cells:
        if v is not None:
            if acc is None:
                acc = v
            elif fn == "cumsum":
                acc = acc + v
            elif fn == "pmin":
                acc = min(acc, v)
            elif fn == "pmax":
                acc = max(acc, v)
            else:
                raise TypeMismatch(f"unknown window function {fn!r}")
        out.append(acc)
    return out


# ---------------------------------------------------------------------------
# Operation semantics
# ---------------------------------------------------------------------------

def _pair_join(left: Table, right: Table, pairs: list[tuple[int, int]],
               keep: str) -> Table:
    """Join on index pairs with SQL null semantics (null never matches).

    keep: 'both' merges schemas left-first, 'left' keeps only left columns
    (semi join), 'left_outer' additionally null-fills right columns for
    unmatched left rows.
    """
    left_names = left.column_names
    right_only = [i for i, name in enumerate(right.column_names)
                  if name not in left_names]
    if keep == "left":
        out_schema = left.schema
    else:
        out_schema = Schema(left.schema.columns +
                            tuple(right.schema.columns[i] for i in right_only))
    index: dict[tuple, list[tuple]] = {}
    for row in right.rows:
        key = tuple(row[ri] for _, ri in pairs)
        if any(v is None for v in key):
            continue
        index.setdefault(key, []).append(row)
    out_rows = []
    for row in left.rows:
        key = tuple(row[li] for li, _ in pairs)
        matches = [] if any(v is None for v in key) else index.get(key, [])
        if keep == "left":
            if matches:
                out_rows.append(row)
        elif keep == "left_outer" and not matches:
            out_rows.append(row + (None,) * len(right_only))
        else:
            for m in matches:
                out_rows.append(row + tuple(m[i] for i in right_only))
    return Table(out_schema, tuple(out_rows))


def _shared_pairs(a: Table, b: Table) -> list[tuple[int, int]]:
    return [(a.schema.index_of(name), b.schema.index_of(name))
            for name in a.column_names if name in b.column_names]


def natural_join(a: Table, b: Table) -> Table:
    pairs = _shared_pairs(a, b)
    if not pairs:
        # No shared columns: degenerate to the full cross product.
        out_schema = Schema(a.schema.columns + b.schema.columns)
        rows = tuple(ra + rb for ra in a.rows for rb in b.rows)
        return Table(out_schema, rows)
    return _pair_join(a, b, pairs, keep="both")


def left_join(a: Table, b: Table) -> Table:
    return _pair_join(a, b, _shared_pairs(a, b), keep="left_outer")


def _evaluate_filter(table: Table, cond: FilterCondition) -> Table:
    idx = {name: i for i, name in enumerate(table.column_names)}

    def atom_holds(atom, row) -> bool:
        lhs = row[idx[atom.column]]
        rhs = row[idx[atom.rhs.name]] if isinstance(atom.rhs, ColumnRef) else atom.rhs
        return _compare_cells(lhs, rhs, atom.op)

    out = []
    for row in table.rows:
        results = [atom_holds(a, row) for a in cond.atoms]
        if len(results) == 1:
            ok = results[0]
        elif cond.combinator == "and":
            ok = results[0] and results[1]
        else:
            ok = results[0] or results[1]
        if ok:
            out.append(row)
    return Table(table.schema, tuple(out))


def _aggregate_column(table: Table, cond: SummariseCondition):
    """Resolve the aggregated column's index/type, checking applicability."""
    if cond.fn in ZERO_ARG_FNS:
        if cond.column is not None:
            raise ArityError(f"{cond.fn} takes no column")
        result_type = aggregate_result_type(cond.fn, None)
        return None, result_type
    col_type = table.schema.type_of(cond.column)
    result_type = aggregate_result_type(cond.fn, col_type)
    if result_type is None:
        raise TypeMismatch(f"{cond.fn} not applicable to {col_type} column")
    return table.schema.index_of(cond.column), result_type


def summarise(table: Table, cond: SummariseCondition, cols: Sequence[str]) -> Table:
    col_idx, result_type = _aggregate_column(table, cond)
    group_idx = [table.schema.index_of(c) for c in cols]
    groups: dict[tuple, list[tuple]] = {}
    for row in table.rows:
        groups.setdefault(tuple(row[i] for i in group_idx), []).append(row)
    if not cols:
        groups.setdefault((), [])
    out_schema = Schema(tuple((c, table.schema.type_of(c)) for c in cols) +
                        ((cond.new_column, result_type),))
    out_rows = []
    for key, rows in groups.items():
        cells = None if col_idx is None else [r[col_idx] for r in rows]
        value = _reduce(cond.fn, len(rows), cells)
        if result_type is ColType.REAL and isinstance(value, int):
            value = float(value)
        out_rows.append(key + (value,))
    return Table(out_schema, tuple(out_rows))


def mutate(table: Table, cond: SummariseCondition) -> Table:
    col_idx, result_type = _aggregate_column(table, cond)
    cells = None if col_idx is None else [r[col_idx] for r in table.rows]
    if is_window_fn(cond.fn):
        new_cells = _window(cond.fn, cells, len(table.rows))
    else:
        value = _reduce(cond.fn, len(table.rows), cells)
        new_cells = [value] * len(table.rows)
    if result_type is ColType.REAL:
        new_cells = [float(v) if isinstance(v, int) else v for v in new_cells]
    names = table.column_names
    if cond.new_column in names:
        # dplyr-style overwrite of an existing column.
        i = table.schema.index_of(cond.new_column)
        columns = list(table.schema.columns)
        columns[i] = (cond.new_column, result_type)
        rows = tuple(row[:i] + (v,) + row[i + 1:]
                     for row, v in zip(table.rows, new_cells))
        return Table(Schema(tuple(columns)), rows)
    out_schema = Schema(table.schema.columns + ((cond.new_column, result_type),))
    rows = tuple(row + (v,) for row, v in zip(table.rows, new_cells))
    return Table(out_schema, rows)


def _unify_types(ta: ColType, tb: ColType) -> ColType:
    if ta == tb:
        return ta
    if {ta, tb} <= NUMERIC_TYPES:
        return ColType.REAL
    raise NonUnionCompatible(f"column types {ta} and {tb} are not compatible")


def union(a: Table, b: Table) -> Table:
    if set(a.column_names) != set(b.column_names):
        raise NonUnionCompatible(
            f"column sets differ: {a.column_names} vs {b.column_names}")
    perm = [b.schema.index_of(name) for name in a.column_names]
    columns = tuple(
        (name, _unify_types(a.schema.type_of(name), b.schema.type_of(name)))
        for name in a.column_names)
    rows = a.rows + tuple(tuple(row[i] for i in perm) for row in b.rows)
    return Table(Schema(columns), rows)


def intersect(a: Table, b: Table, col: str) -> Table:
    ai, bi = a.schema.index_of(col), b.schema.index_of(col)
    out_type = _unify_types(a.schema.type_of(col), b.schema.type_of(col))
    b_values = {row[bi] for row in b.rows}
    seen = set()
    out = []
    for row in a.rows:
        v = row[ai]
        if v in b_values and v not in seen:
            seen.add(v)
            out.append((v,))
    return Table(Schema(((col, out_type),)), tuple(out))


def anti_join(a: Table, b: Table, cols: Sequence[str]) -> Table:
    pairs = ([(a.schema.index_of(c), b.schema.index_of(c)) for c in cols]
             if cols else _shared_pairs(a, b))
    keys = set()
    for row in b.rows:
        key = tuple(row[ri] for _, ri in pairs)
        if not any(v is None for v in key):
            keys.add(key)
    out = []
    for row in a.rows:
        key = tuple(row[li] for li, _ in pairs)
        if any(v is None for v in key) or key not in keys:
            out.append(row)
    return Table(a.schema, tuple(out))


def semi_join(a: Table, b: Table) -> Table:
    return _pair_join(a, b, _shared_pairs(a, b), keep="left")


def apply_line(op: str, args: Sequence, env: Mapping[str, Table]) -> Table:
    """Execute one DSL line against an environment of named tables.

    Re-checks the column inference rules defensively: a line whose premise
    fails raises UnknownColumn even if each referenced column exists
    somewhere else in the environment.
    """
    sig = dsl.OPERATIONS.get(op)
    if sig is None:
        raise ArityError(f"unknown operation {op!r}")
    if len(args) != len(sig):
        raise ArityError(f"{op} expects {len(sig)} args, got {len(args)}")
    col_sets = {}
    for arg, kind in zip(args, sig):
        if kind == dsl.TABLE:
            if arg not in env:
                raise UnknownColumn(f"table {arg!r} not defined")
            col_sets[arg] = frozenset(env[arg].column_names)
    try:
        dsl.line_output_columns(Line("_", op, tuple(args)), col_sets)
    except dsl.RuleViolation as exc:
        raise UnknownColumn(str(exc)) from exc

    tables = [env[a] for a, kind in zip(args, sig) if kind == dsl.TABLE]
    if op == "natural_join":
        return natural_join(*tables)
    if op == "natural_join3":
        return natural_join(natural_join(tables[0], tables[1]), tables[2])
    if op == "natural_join4":
        joined = natural_join(natural_join(tables[0], tables[1]), tables[2])
        return natural_join(joined, tables[3])
    if op == "left_join":
        return left_join(*tables)
    if op in ("inner_join", "cross_join"):
        cond: JoinCondition = args[2]
        a, b = tables
        pairs = [(a.schema.index_of(cond.left_column),
                  b.schema.index_of(cond.right_column))]
        return _pair_join(a, b, pairs, keep="both")
    if op == "filter":
        return _evaluate_filter(tables[0], args[1])
    if op == "summarise":
        return summarise(tables[0], args[1], args[2])
    if op == "mutate":
        return mutate(tables[0], args[1])
    if op == "anti_join":
        return anti_join(tables[0], tables[1], args[2])
    if op == "semi_join":
        return semi_join(*tables)
    if op == "union":
        return union(*tables)
    if op == "intersect":
        return intersect(tables[0], tables[1], args[2])
    raise ArityError(f"unhandled operation {op!r}")


# ---------------------------------------------------------------------------
# Table comparison
# ---------------------------------------------------------------------------

def tables_equal_strict(a: Table, b: Table) -> bool:
    """Equal column-name lists and equal row multisets; order ignored."""
    if a.column_names != b.column_names:
        return False
    return Counter(a.rows) == Counter(b.rows)


def _canonical_grid(t: Table) -> list[tuple]:
    return [tuple(lax_canonical(v) for v in row) for row in t.rows]


def tables_equal_lax(a: Table, b: Table) -> bool:
    """Equality up to row order, column order, column names, and numeric
    coercion of cells."""
    if len(a.schema) != len(b.schema) or len(a.rows) != len(b.rows):
        return False
    grid_a = _canonical_grid(a)
    grid_b = _canonical_grid(b)
    n = len(a.schema)
    cols_a = [Counter(row[i] for row in grid_a) for i in range(n)]
    cols_b = [Counter(row[i] for row in grid_b) for i in range(n)]

    candidates = [[j for j in range(n) if cols_b[j] == cols_a[i]]
                  for i in range(n)]
    if any(not c for c in candidates):
        return False

    target = Counter(grid_a)

    def assign(i: int, used: set[int], perm: list[int]) -> bool:
        if i == n:
            permuted = Counter(tuple(row[j] for j in perm) for row in grid_b)
            return permuted == target
        for j in candidates[i]:
            if j not in used:
                used.add(j)
                perm.append(j)
                if assign(i + 1, used, perm):
                    return True
                perm.pop()
                used.remove(j)
        return False

    return assign(0, set(), [])


def unique_values(t: Table) -> set:
    """Distinct cell values (lax-canonical form), nulls excluded."""
    return {lax_canonical(v) for row in t.rows for v in row if v is not None}
