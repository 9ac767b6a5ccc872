"""Line-based program representation for the relational DSL.

A program is an ordered list of single-assignment lines.  Each line applies
one operation to tables defined earlier (input tables or previous line
outputs) plus condition/column arguments.  This module owns the grammar
metadata (which operation takes which argument kinds) and the column
inference rules used to decide whether a line can be valid at all.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Union


class DslError(Exception):
    """Base class for program representation errors."""


class RuleViolation(DslError):
    def __init__(self, line_index: int, rule: str, detail: str):
        super().__init__(f"line {line_index}: {rule}: {detail}")
        self.line_index = line_index
        self.rule = rule
        self.detail = detail


class EmptyProgram(DslError):
    pass


# Argument kinds, in the order they appear in each operation's signature.
TABLE = "table"
FILTER_COND = "filter_condition"
JOIN_COND = "join_condition"
CROSS_JOIN_COND = "cross_join_condition"
SUMMARISE_COND = "summarise_condition"
COLS = "cols"
COL = "col"

# Operation -> argument kind signature.
OPERATIONS: dict[str, tuple[str, ...]] = {
    "natural_join": (TABLE, TABLE),
    "natural_join3": (TABLE, TABLE, TABLE),
    "natural_join4": (TABLE, TABLE, TABLE, TABLE),
    "left_join": (TABLE, TABLE),
    "inner_join": (TABLE, TABLE, JOIN_COND),
    "cross_join": (TABLE, TABLE, CROSS_JOIN_COND),
    "filter": (TABLE, FILTER_COND),
    "summarise": (TABLE, SUMMARISE_COND, COLS),
    "mutate": (TABLE, SUMMARISE_COND),
    "anti_join": (TABLE, TABLE, COLS),
    "semi_join": (TABLE, TABLE),
    "union": (TABLE, TABLE),
    "intersect": (TABLE, TABLE, COL),
}

OPERATION_ORDER: tuple[str, ...] = tuple(OPERATIONS)

# Operations whose argument spaces dwarf the others; used for worker splitting.
COMPLEX_JOINS = frozenset({"inner_join", "cross_join"})

COMPARATORS = ("==", "!=", "<", "<=", ">", ">=")


@dataclass(frozen=True)
class ColumnRef:
    """Marks a right-hand side of a filter atom as a column, not a constant."""

    name: str


@dataclass(frozen=True)
class FilterAtom:
    column: str
    op: str
    rhs: object  # constant value or ColumnRef

    def columns(self) -> frozenset[str]:
        if isinstance(self.rhs, ColumnRef):
            return frozenset({self.column, self.rhs.name})
        return frozenset({self.column})

    def render(self) -> str:
        rhs = self.rhs.name if isinstance(self.rhs, ColumnRef) else repr(self.rhs)
        return f"{self.column} {self.op} {rhs}"


@dataclass(frozen=True)
class FilterCondition:
    """One or two comparison atoms joined by and/or."""

    atoms: tuple[FilterAtom, ...]
    combinator: Optional[str] = None  # "and" | "or" when two atoms

    def __post_init__(self):
        if not 1 <= len(self.atoms) <= 2:
            raise DslError("filter condition takes one or two atoms")
        if len(self.atoms) == 2 and self.combinator not in ("and", "or"):
            raise DslError("two-atom filter condition needs and/or")

    def columns(self) -> frozenset[str]:
        cols: frozenset[str] = frozenset()
        for atom in self.atoms:
            cols |= atom.columns()
        return cols

    def render(self) -> str:
        if len(self.atoms) == 1:
            return self.atoms[0].render()
        return f"{self.atoms[0].render()} {self.combinator} {self.atoms[1].render()}"


@dataclass(frozen=True)
class JoinCondition:
    """Equality between a column of the left table and one of the right."""

    left_column: str
    right_column: str

    def render(self) -> str:
        return f"{self.left_column} == {self.right_column}"


@dataclass(frozen=True)
class SummariseCondition:
    """`new_column = fn(column)`; column is None for zero-argument fns."""

    new_column: str
    fn: str
    column: Optional[str]

    def used_columns(self) -> frozenset[str]:
        return frozenset() if self.column is None else frozenset({self.column})

    def generated_columns(self) -> frozenset[str]:
        return frozenset({self.new_column})

    def render(self) -> str:
        arg = self.column if self.column is not None else ""
        return f"{self.new_column} = {self.fn}({arg})"


Argument = Union[str, FilterCondition, JoinCondition, SummariseCondition,
                 tuple, ColumnRef]


@dataclass(frozen=True)
class Line:
    output: str
    op: str
    args: tuple

    def table_args(self) -> tuple[str, ...]:
        sig = OPERATIONS[self.op]
        return tuple(a for a, kind in zip(self.args, sig) if kind == TABLE)

    def render(self) -> str:
        parts = []
        for arg, kind in zip(self.args, OPERATIONS[self.op]):
            if kind == TABLE or kind == COL:
                parts.append(str(arg))
            elif kind == COLS:
                parts.append("[" + ", ".join(arg) + "]")
            else:
                parts.append(arg.render())
        return f"{self.output} = {self.op}({', '.join(parts)})"


@dataclass(frozen=True)
class Program:
    lines: tuple[Line, ...]

    @property
    def size(self) -> int:
        return len(self.lines)

    @property
    def result_name(self) -> str:
        return self.lines[-1].output

    def op_sequence(self) -> tuple[str, ...]:
        return tuple(line.op for line in self.lines)

    def render(self) -> str:
        return "\n".join(line.render() for line in self.lines)


def program(lines: Iterable[Line]) -> Program:
    return Program(tuple(lines))


# ---------------------------------------------------------------------------
# Column inference rules
# ---------------------------------------------------------------------------

def line_output_columns(line: Line,
                        col_sets: Mapping[str, frozenset[str]],
                        index: int = 0) -> frozenset[str]:
    """Apply the inference rule for `line` over known per-table column sets.

    Returns the column set of the line's output table, raising RuleViolation
    when a premise fails.  `col_sets` must contain every table the line
    references.
    """
    op = line.op
    sig = OPERATIONS[op]
    if len(line.args) != len(sig):
        raise RuleViolation(index, op, f"expected {len(sig)} args, got {len(line.args)}")

    def tset(name: str) -> frozenset[str]:
        if name not in col_sets:
            raise RuleViolation(index, op, f"unknown table {name!r}")
        return col_sets[name]

    def fail(rule: str, detail: str):
        raise RuleViolation(index, rule, detail)

    if op in ("natural_join", "natural_join3", "natural_join4", "union"):
        out: frozenset[str] = frozenset()
        for name in line.args:
            out |= tset(name)
        return out

    if op == "left_join":
        t1, t2 = tset(line.args[0]), tset(line.args[1])
        if not t1 & t2:
            fail("LeftJoin", "operands share no columns")
        return t1 | t2

    if op == "semi_join":
        t1, t2 = tset(line.args[0]), tset(line.args[1])
        if not t1 & t2:
            fail("SemiJoin", "operands share no columns")
        return t1

    if op == "inner_join":
        t1, t2 = tset(line.args[0]), tset(line.args[1])
        cond: JoinCondition = line.args[2]
        if cond.left_column not in t1:
            fail("InnerJoin", f"{cond.left_column!r} not in left table")
        if cond.right_column not in t2:
            fail("InnerJoin", f"{cond.right_column!r} not in right table")
        return t1 | t2

    if op == "cross_join":
        t1, t2 = tset(line.args[0]), tset(line.args[1])
        cond = line.args[2]
        if cond.left_column not in t1:
            fail("CrossJoin", f"{cond.left_column!r} not in left table")
        if cond.right_column not in (t1 & t2):
            fail("CrossJoin", f"{cond.right_column!r} not shared by both tables")
        return t1 | t2

    if op == "filter":
        t = tset(line.args[0])
        cond = line.args[1]
        missing = cond.columns() - t
        if missing:
            fail("Filter", f"columns {sorted(missing)} not in table")
        return t

    if op == "summarise":
        t = tset(line.args[0])
        cond: SummariseCondition = line.args[1]
        cols = frozenset(line.args[2])
        if not cond.used_columns() <= t:
            fail("Summarise", f"aggregated column {cond.column!r} not in table")
        if not cols <= t:
            fail("Summarise", f"group columns {sorted(cols - t)} not in table")
        if cols & cond.generated_columns():
            fail("Summarise", "generated column collides with group columns")
        return cond.generated_columns() | cols

    if op == "mutate":
        t = tset(line.args[0])
        cond = line.args[1]
        if not cond.used_columns() <= t:
            fail("Mutate", f"aggregated column {cond.column!r} not in table")
        return t | cond.generated_columns()

    if op == "anti_join":
        t1, t2 = tset(line.args[0]), tset(line.args[1])
        cols = frozenset(line.args[2])
        if not cols <= t1:
            fail("AntiJoin", f"columns {sorted(cols - t1)} not in left table")
        if not cols <= t2:
            fail("AntiJoin", f"columns {sorted(cols - t2)} not in right table")
        if not cols and not t1 & t2:
            fail("AntiJoin", "no join columns given and operands share none")
        return t1

    if op == "intersect":
        t1, t2 = tset(line.args[0]), tset(line.args[1])
        col = line.args[2]
        if col not in t1:
            fail("Intersect", f"{col!r} not in left table")
        if col not in t2:
            fail("Intersect", f"{col!r} not in right table")
        return frozenset({col})

    raise RuleViolation(index, op, "unknown operation")


def validate(prog: Program,
             schemas: Mapping[str, Iterable[str]]) -> list[frozenset[str]]:
    """Check a program line by line against the column inference rules.

    `schemas` maps input table names to their column names.  Returns the
    per-line output column sets; raises RuleViolation on the first failed
    premise and EmptyProgram for a program with no lines.
    """
    if not prog.lines:
        raise EmptyProgram("program has no lines")
    col_sets: dict[str, frozenset[str]] = {
        name: frozenset(cols) for name, cols in schemas.items()
    }
    out: list[frozenset[str]] = []
    for i, line in enumerate(prog.lines):
        if line.output in col_sets:
            raise RuleViolation(i, "SingleAssignment",
                                f"{line.output!r} already defined")
        for t in line.table_args():
            if t not in col_sets:
                raise RuleViolation(i, "ForwardReference",
                                    f"table {t!r} not yet defined")
        cols = line_output_columns(line, col_sets, i)
        col_sets[line.output] = cols
        out.append(cols)
    return out
