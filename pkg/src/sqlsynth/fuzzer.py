"""Schema- and foreign-key-preserving database fuzzing.

Fuzzed tables keep the original schemas; cells are drawn from a weighted mix
of three sources: type-uniform values, values from the corresponding original
column plus close mutations, and constants mentioned by the queries under
comparison plus the same mutations.  Declared foreign keys always hold: a
child column samples only from the key values its parent table actually
received, with parents generated first.

Everything is driven by one seeded generator in a fixed iteration order, so
equal seeds give bit-identical databases.
"""

from __future__ import annotations

import datetime
import random
import re
import string
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from .dsl import ColumnRef, Program
from .instance import ForeignKey
from .relational import INT64_MAX, INT64_MIN, ColType, Table

REAL_RANGE = 1_000_000.0
TEXT_ALPHABET = string.ascii_lowercase
DATE_EPOCH_RANGE = (0, 36524)  # days since 1970-01-01, ~100 years


class FuzzError(Exception):
    pass


class EmptyKeyPool(FuzzError):
    pass


@dataclass(frozen=True)
class FuzzConfig:
    seed: int = 0
    row_count_min: int = 1
    row_count_max: Optional[int] = None  # default: 2 * original rows + 2
    source_weights: tuple[float, float, float] = (1.0, 2.0, 2.0)

    def __post_init__(self):
        if self.row_count_min < 1:
            raise FuzzError("row_count_min must be at least 1")
        if any(w <= 0 for w in self.source_weights):
            raise FuzzError("source weights must be positive")


def _shift_date(text: str, days: int) -> Optional[str]:
    try:
        if "T" in text or " " in text:
            sep = "T" if "T" in text else " "
            dt = datetime.datetime.fromisoformat(text.replace(" ", "T"))
            return (dt + datetime.timedelta(days=days)).isoformat(sep=sep)
        day = datetime.date.fromisoformat(text)
        return (day + datetime.timedelta(days=days)).isoformat()
    except ValueError:
        return None


def related_values(value, rng: Optional[random.Random] = None,
                   col_type: Optional[ColType] = None) -> list:
    """Type-directed neighborhood of a value, the value included.

    Text gains one- and two-letter suffixes (random letters under an rng,
    'g'/'gg' otherwise); numbers move by one and flip sign; dates shift a
    day either way.
    """
    if value is None:
        return [None]
    if isinstance(value, bool):
        return [value, not value]
    if isinstance(value, (int, float)):
        out = [value]
        for v in (value - 1, value + 1, -value):
            if isinstance(v, int) and not INT64_MIN <= v <= INT64_MAX:
                continue
            if v not in out:
                out.append(v)
        return out
    if isinstance(value, str):
        if col_type is ColType.DATETIME:
            out = [value]
            for days in (-1, 1):
                shifted = _shift_date(value, days)
                if shifted:
                    out.append(shifted)
            return out
        if rng is None:
            first, second = "g", "g"
        else:
            first = rng.choice(TEXT_ALPHABET)
            second = rng.choice(TEXT_ALPHABET)
        return [value, value + first, value + first + second]
    return [value]


def _uniform_value(ctype: ColType, rng: random.Random):
    if ctype is ColType.INT:
        return rng.randint(INT64_MIN, INT64_MAX)
    if ctype is ColType.REAL:
        return round(rng.uniform(-REAL_RANGE, REAL_RANGE), 3)
    if ctype is ColType.TEXT:
        length = rng.randint(1, 8)
        return "".join(rng.choice(TEXT_ALPHABET) for _ in range(length))
    if ctype is ColType.DATETIME:
        day = datetime.date(1970, 1, 1) + datetime.timedelta(
            days=rng.randint(*DATE_EPOCH_RANGE))
        return day.isoformat()
    if ctype is ColType.BOOL:
        return rng.random() < 0.5
    raise FuzzError(f"cannot fuzz column type {ctype}")


_SQL_STRING_RE = re.compile(r"'((?:[^']|'')*)'")
_SQL_NUMBER_RE = re.compile(r"(?<![\w.'])-?\d+(?:\.\d+)?(?![\w.'])")


def query_constants(query) -> list:
    """Constants mentioned by a query: filter-atom constants of a Program,
    or literals scraped from SQL text."""
    if isinstance(query, Program):
        out = []
        for line in query.lines:
            if line.op != "filter":
                continue
            for atom in line.args[1].atoms:
                if not isinstance(atom.rhs, ColumnRef) and atom.rhs not in out:
                    out.append(atom.rhs)
        return out
    text = str(query)
    out = []
    for match in _SQL_STRING_RE.finditer(text):
        value = match.group(1).replace("''", "'")
        if value not in out:
            out.append(value)
    stripped = _SQL_STRING_RE.sub("", text)
    for match in _SQL_NUMBER_RE.finditer(stripped):
        token = match.group(0)
        value = float(token) if "." in token else int(token)
        if value not in out:
            out.append(value)
    return out


def _compatible(value, ctype: ColType) -> bool:
    if value is None:
        return False
    if isinstance(value, bool):
        return ctype is ColType.BOOL
    if isinstance(value, int):
        return ctype in (ColType.INT, ColType.REAL)
    if isinstance(value, float):
        return ctype is ColType.REAL or (
            ctype is ColType.INT and value.is_integer()
            and INT64_MIN <= value <= INT64_MAX)
    if isinstance(value, str):
        if ctype is ColType.DATETIME:
            return _shift_date(value, 0) is not None
        return ctype is ColType.TEXT
    return False


def _coerce(value, ctype: ColType):
    if ctype is ColType.INT and isinstance(value, float):
        return int(value)
    if ctype is ColType.REAL and isinstance(value, int):
        return float(value)
    return value


def _dedup(values: Iterable) -> list:
    out = []
    for v in values:
        if v not in out:
            out.append(v)
    return out


def topological_table_order(names: Sequence[str],
                            fks: Sequence[ForeignKey]) -> list[str]:
    """Parents before children; falls back to given order inside cycles."""
    parents: dict[str, set[str]] = {name: set() for name in names}
    for fk in fks:
        if fk.child_table != fk.parent_table:
            parents[fk.child_table].add(fk.parent_table)
    order: list[str] = []
    remaining = list(names)
    while remaining:
        ready = [n for n in remaining if parents[n] <= set(order)]
        if not ready:
            ready = [remaining[0]]  # cycle; keep declaration order
        order.append(ready[0])
        remaining.remove(ready[0])
    return order


def fuzz_database(tables: Mapping[str, Table], queries: Sequence,
                  fks: Sequence[ForeignKey] = (),
                  config: FuzzConfig = FuzzConfig()) -> dict[str, Table]:
    rng = random.Random(config.seed)
    constants = _dedup(c for q in queries for c in query_constants(q))

    fk_map: dict[tuple[str, str], tuple[str, str]] = {}
    for fk in fks:
        fk_map[(fk.child_table, fk.child_column)] = (
            fk.parent_table, fk.parent_column)

    result: dict[str, Table] = {}
    for name in topological_table_order(list(tables), fks):
        original = tables[name]
        upper = (config.row_count_max if config.row_count_max is not None
                 else 2 * len(original) + 2)
        n_rows = rng.randint(config.row_count_min, max(config.row_count_min,
                                                       upper))
        column_cells: list[list] = []
        for ci, (col, ctype) in enumerate(original.schema.columns):
            key_ref = fk_map.get((name, col))
            if key_ref is not None:
                parent_name, parent_col = key_ref
                parent = result.get(parent_name)
                if parent is None:
                    # Cycle or self-reference: fall back to original values.
                    pool = [v for v in original.column(col) if v is not None]
                else:
                    pool = [v for v in parent.column(parent_col)
                            if v is not None]
                if not pool:
                    raise EmptyKeyPool(
                        f"{parent_name if parent else name}.{col} has no key "
                        f"values to draw from")
                column_cells.append([rng.choice(pool) for _ in range(n_rows)])
                continue

            original_pool = _dedup(
                v2 for v in _dedup(original.column(col))
                for v2 in related_values(v, rng, ctype))
            constant_pool = _dedup(
                _coerce(v2, ctype)
                for v in constants if _compatible(v, ctype)
                for v2 in related_values(_coerce(v, ctype), rng, ctype)
                if _compatible(v2, ctype) or v2 is None)
            sources = [None, original_pool, constant_pool]
            weights = list(config.source_weights)
            cells = []
            for _ in range(n_rows):
                pick = rng.choices(range(3), weights=weights)[0]
                pool = sources[pick]
                if pick == 0 or not pool:
                    cells.append(_uniform_value(ctype, rng))
                else:
                    cells.append(rng.choice(pool))
            column_cells.append(cells)
        rows = tuple(tuple(col[i] for col in column_cells)
                     for i in range(n_rows))
        result[name] = Table(original.schema, rows)
    return {name: result[name] for name in tables}
