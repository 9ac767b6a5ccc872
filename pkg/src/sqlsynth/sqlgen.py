"""Translation of DSL programs to SQLite-dialect SQL, plus an embedded
executor.

Programs are emitted as a chain of CTEs, one per line, with a final SELECT
that applies the verifier's projection/renaming.  `run_sql` executes the text
against an in-memory SQLite database loaded with the given tables; it
registers `median` and `mode_agg` aggregates, which SQLite lacks natively, so
emitted queries that use them remain executable.
"""

from __future__ import annotations

import sqlite3
from collections import Counter
from typing import Mapping, Optional, Sequence

from . import dsl, relational
from .dsl import ColumnRef, FilterCondition, JoinCondition, SummariseCondition
from .relational import ColType, Schema, Table


class SqlGenError(Exception):
    pass


class UntranslatableWindowFunction(SqlGenError):
    pass


def quote_ident(name: str) -> str:
    return '"' + name.replace('"', '""') + '"'


def quote_literal(value) -> str:
    if value is None:
        return "NULL"
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, float)):
        return repr(value)
    return "'" + str(value).replace("'", "''") + "'"


_CMP_SQL = {"==": "=", "!=": "<>", "<": "<", "<=": "<=", ">": ">", ">=": ">="}

_AGG_SQL = {
    "n": lambda c: "count(*)",
    "n_distinct": lambda c: f"count(DISTINCT {c})",
    "sum": lambda c: f"sum({c})",
    "mean": lambda c: f"avg({c})",
    "min": lambda c: f"min({c})",
    "max": lambda c: f"max({c})",
    "str_count": lambda c: f"sum(length({c}))",
    "median": lambda c: f"median({c})",
    "mode": lambda c: f"mode_agg({c})",
}

_RUNNING_FRAME = "ROWS BETWEEN UNBOUNDED PRECEDING AND CURRENT ROW"

_WINDOW_SQL = {
    "cumsum": lambda c: f"sum({c}) OVER ({_RUNNING_FRAME})",
    "pmin": lambda c: f"min({c}) OVER ({_RUNNING_FRAME})",
    "pmax": lambda c: f"max({c}) OVER ({_RUNNING_FRAME})",
    "lead": lambda c: f"lead({c}) OVER ()",
    "lag": lambda c: f"lag({c}) OVER ()",
    "rank": lambda c: f"rank() OVER (ORDER BY {c})",
    "row_number": lambda c: "row_number() OVER ()",
}


def _agg_sql(cond: SummariseCondition) -> str:
    col = quote_ident(cond.column) if cond.column is not None else ""
    if cond.fn in _AGG_SQL:
        return _AGG_SQL[cond.fn](col)
    if cond.fn in _WINDOW_SQL:
        return _WINDOW_SQL[cond.fn](col)
    raise UntranslatableWindowFunction(f"no SQL equivalent for {cond.fn!r}")


def _atom_sql(atom) -> str:
    rhs = (quote_ident(atom.rhs.name) if isinstance(atom.rhs, ColumnRef)
           else quote_literal(atom.rhs))
    return f"{quote_ident(atom.column)} {_CMP_SQL[atom.op]} {rhs}"


def _filter_sql(cond: FilterCondition) -> str:
    if len(cond.atoms) == 1:
        return _atom_sql(cond.atoms[0])
    op = cond.combinator.upper()
    return f"({_atom_sql(cond.atoms[0])} {op} {_atom_sql(cond.atoms[1])})"


def _join_select(left_cols: Sequence[str], right_cols: Sequence[str]) -> str:
    parts = [f"t1.{quote_ident(c)}" for c in left_cols]
    parts += [f"t2.{quote_ident(c)}" for c in right_cols if c not in left_cols]
    return ", ".join(parts)


def _pair_join_sql(left_ref: str, left_cols: Sequence[str], right_ref: str,
                   right_cols: Sequence[str],
                   on_pairs: Sequence[tuple[str, str]],
                   join_kw: str) -> str:
    select = _join_select(left_cols, right_cols)
    if not on_pairs:
        return f"SELECT {select} FROM {left_ref} AS t1 CROSS JOIN {right_ref} AS t2"
    on = " AND ".join(f"t1.{quote_ident(l)} = t2.{quote_ident(r)}"
                      for l, r in on_pairs)
    return (f"SELECT {select} FROM {left_ref} AS t1 "
            f"{join_kw} {right_ref} AS t2 ON {on}")


def _merged_cols(left_cols: Sequence[str], right_cols: Sequence[str]) -> list[str]:
    return list(left_cols) + [c for c in right_cols if c not in left_cols]


def _line_sql(line: dsl.Line, schemas: Mapping[str, tuple[str, ...]]) -> str:
    op = line.op

    def cols(name: str) -> tuple[str, ...]:
        return schemas[name]

    def ref(name: str) -> str:
        return quote_ident(name)

    if op in ("natural_join", "natural_join3", "natural_join4"):
        names = list(line.args)
        sql = ref(names[0])
        acc_cols = list(cols(names[0]))
        for name in names[1:]:
            rc = cols(name)
            shared = [(c, c) for c in acc_cols if c in rc]
            sql = _pair_join_sql(f"({sql})" if " " in sql else sql, acc_cols,
                                 ref(name), rc, shared, "JOIN")
            acc_cols = _merged_cols(acc_cols, rc)
        return sql

    if op == "left_join":
        a, b = line.args
        shared = [(c, c) for c in cols(a) if c in cols(b)]
        return _pair_join_sql(ref(a), cols(a), ref(b), cols(b), shared,
                              "LEFT JOIN")

    if op in ("inner_join", "cross_join"):
        a, b, cond = line.args
        return _pair_join_sql(ref(a), cols(a), ref(b), cols(b),
                              [(cond.left_column, cond.right_column)], "JOIN")

    if op == "filter":
        a, cond = line.args
        return f"SELECT * FROM {ref(a)} WHERE {_filter_sql(cond)}"

    if op == "summarise":
        a, cond, group_cols = line.args
        select = [quote_ident(c) for c in group_cols]
        select.append(f"{_agg_sql(cond)} AS {quote_ident(cond.new_column)}")
        sql = f"SELECT {', '.join(select)} FROM {ref(a)}"
        if group_cols:
            sql += " GROUP BY " + ", ".join(quote_ident(c) for c in group_cols)
        return sql

    if op == "mutate":
        a, cond = line.args
        if cond.fn in _WINDOW_SQL:
            expr = _agg_sql(cond)
        else:
            expr = f"(SELECT {_agg_sql(cond)} FROM {ref(a)})"
        select = []
        for c in cols(a):
            if c == cond.new_column:
                continue
            select.append(quote_ident(c))
        select.append(f"{expr} AS {quote_ident(cond.new_column)}")
        return f"SELECT {', '.join(select)} FROM {ref(a)}"

    if op in ("anti_join", "semi_join"):
        if op == "anti_join":
            a, b, join_cols = line.args
            if not join_cols:
                join_cols = [c for c in cols(a) if c in cols(b)]
            keyword = "NOT EXISTS"
        else:
            a, b = line.args
            join_cols = [c for c in cols(a) if c in cols(b)]
            keyword = "EXISTS"
        on = " AND ".join(f"t2.{quote_ident(c)} = t1.{quote_ident(c)}"
                          for c in join_cols)
        return (f"SELECT * FROM {ref(a)} AS t1 WHERE {keyword} "
                f"(SELECT 1 FROM {ref(b)} AS t2 WHERE {on})")

    if op == "union":
        a, b = line.args
        select = ", ".join(quote_ident(c) for c in cols(a))
        return (f"SELECT {select} FROM {ref(a)} "
                f"UNION ALL SELECT {select} FROM {ref(b)}")

    if op == "intersect":
        a, b, col = line.args
        c = quote_ident(col)
        return (f"SELECT {c} FROM {ref(a)} INTERSECT SELECT {c} FROM {ref(b)}")

    raise SqlGenError(f"unhandled operation {op!r}")


def line_schemas(prog: dsl.Program,
                 input_tables: Mapping[str, Table]) -> dict[str, Schema]:
    """Ordered output schema of every line, derived by running the engine
    over empty copies of the inputs."""
    env = {name: Table(t.schema, ()) for name, t in input_tables.items()}
    out: dict[str, Schema] = {}
    for line in prog.lines:
        result = relational.apply_line(line.op, line.args, env)
        env[line.output] = result
        out[line.output] = result.schema
    return out


def to_sql(prog: dsl.Program, projection: Optional[Sequence[tuple[str, str]]],
           input_tables: Mapping[str, Table]) -> str:
    """Emit a single SQLite query for a validated program.

    `projection` lists (output_name, source_column) pairs for the final
    SELECT; None selects every column of the last line unchanged.
    """
    schemas: dict[str, tuple[str, ...]] = {
        name: t.column_names for name, t in input_tables.items()}
    for name, schema in line_schemas(prog, input_tables).items():
        schemas[name] = schema.names

    ctes = []
    for line in prog.lines:
        ctes.append(f"{quote_ident(line.output)} AS ({_line_sql(line, schemas)})")
    last = prog.result_name
    if projection is None:
        select = "*"
    else:
        select = ", ".join(f"{quote_ident(src)} AS {quote_ident(out)}"
                           for out, src in projection)
    return f"WITH {', '.join(ctes)} SELECT {select} FROM {quote_ident(last)}"


# ---------------------------------------------------------------------------
# Embedded execution
# ---------------------------------------------------------------------------

_SQLITE_TYPE = {
    ColType.INT: "INTEGER",
    ColType.REAL: "REAL",
    ColType.TEXT: "TEXT",
    ColType.DATETIME: "TEXT",
    ColType.BOOL: "INTEGER",
}


class _Median:
    def __init__(self):
        self.values = []

    def step(self, value):
        if value is not None:
            self.values.append(value)

    def finalize(self):
        if not self.values:
            return None
        ordered = sorted(self.values)
        mid = len(ordered) // 2
        if len(ordered) % 2:
            return float(ordered[mid])
        return (ordered[mid - 1] + ordered[mid]) / 2


class _Mode:
    def __init__(self):
        self.values = []

    def step(self, value):
        if value is not None:
            self.values.append(value)

    def finalize(self):
        if not self.values:
            return None
        counts = Counter(self.values)
        best = max(counts.values())
        return min((v for v, c in counts.items() if c == best),
                   key=relational.cell_sort_key)


def _connect(tables: Mapping[str, Table]) -> sqlite3.Connection:
    conn = sqlite3.connect(":memory:")
    conn.create_aggregate("median", 1, _Median)
    conn.create_aggregate("mode_agg", 1, _Mode)
    for name, table in tables.items():
        cols = ", ".join(f"{quote_ident(c)} {_SQLITE_TYPE[t]}"
                         for c, t in table.schema.columns)
        conn.execute(f"CREATE TABLE {quote_ident(name)} ({cols})")
        placeholders = ", ".join("?" * len(table.schema))
        conn.executemany(
            f"INSERT INTO {quote_ident(name)} VALUES ({placeholders})",
            [tuple(int(v) if isinstance(v, bool) else v for v in row)
             for row in table.rows])
    return conn


def _infer_result_type(values: list) -> ColType:
    non_null = [v for v in values if v is not None]
    if not non_null:
        return ColType.TEXT
    if all(isinstance(v, int) for v in non_null):
        return ColType.INT
    if all(isinstance(v, (int, float)) for v in non_null):
        return ColType.REAL
    return ColType.TEXT


def run_sql(sql: str, tables: Mapping[str, Table]) -> Table:
    """Execute SQL over the given tables in an in-memory SQLite database."""
    conn = _connect(tables)
    try:
        cursor = conn.execute(sql)
        names = [d[0] for d in cursor.description]
        rows = cursor.fetchall()
    finally:
        conn.close()
    # Mixed int/float columns are widened so Table's cell check accepts them.
    columns = []
    for i, name in enumerate(names):
        columns.append((name, _infer_result_type([r[i] for r in rows])))
    fixed_rows = []
    for row in rows:
        fixed_rows.append(tuple(
            float(v) if columns[i][1] is ColType.REAL and isinstance(v, int)
            else (str(v) if columns[i][1] is ColType.TEXT and v is not None
                  and not isinstance(v, str) else v)
            for i, v in enumerate(row)))
    return Table(Schema(tuple(columns)), tuple(fixed_rows))
