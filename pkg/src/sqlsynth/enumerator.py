"""Constraint-based enumeration of candidate programs.

Column sets are encoded as bitmasks over a fixed universe (input columns plus
every column an aggregate condition can generate).  Arguments carry their
annotation masks; a depth-first search with premise propagation yields every
argument-complete program consistent with a shape — either a cube (operation
sequence) or a maximum size — exactly once, in lexicographic order over
(line index, argument-space index).  Programs that would reference a column
missing from their context are never produced.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

from . import dsl
from .dsl import (ColumnRef, FilterAtom, FilterCondition, JoinCondition,
                  SummariseCondition)
from .instance import Instance
from .relational import (ColType, NUMERIC_TYPES, ZERO_ARG_FNS,
                         aggregate_result_type, is_window_fn)


class UniverseOverflow(Exception):
    pass


@dataclass(frozen=True)
class EnumerationConfig:
    bitmask_width: int = 128
    max_group_cols: int = 2
    max_filter_atoms: int = 2
    text_ordering: bool = False  # only ==/!= on text columns


class ColumnUniverse:
    """Stable index of every column name reachable in an instance."""

    def __init__(self, names: Sequence[str], width: int = 128):
        if len(names) > width:
            raise UniverseOverflow(
                f"{len(names)} columns exceed bitmask width {width}")
        self.names = tuple(names)
        self._index = {name: i for i, name in enumerate(self.names)}

    def bit(self, name: str) -> int:
        return 1 << self._index[name]

    def mask(self, names: Iterable[str]) -> int:
        m = 0
        for name in names:
            m |= self.bit(name)
        return m

    def __len__(self) -> int:
        return len(self.names)


@dataclass(frozen=True)
class AnnotatedArgument:
    payload: object
    ann1: int
    ann2: int = 0
    window: bool = False  # summarise conditions only


@dataclass(frozen=True)
class ArgumentSpace:
    universe: ColumnUniverse
    filter_conditions: tuple[AnnotatedArgument, ...]
    summarise_conditions: tuple[AnnotatedArgument, ...]
    column_pairs: tuple[AnnotatedArgument, ...]
    col_lists: tuple[AnnotatedArgument, ...]
    single_cols: tuple[AnnotatedArgument, ...]
    input_masks: dict[str, int] = field(default_factory=dict)


def _comparable(const, col_type: ColType) -> bool:
    if isinstance(const, bool):
        return col_type is ColType.BOOL
    if isinstance(const, (int, float)):
        return col_type in NUMERIC_TYPES
    if isinstance(const, str):
        return col_type in (ColType.TEXT, ColType.DATETIME)
    return False


def _input_columns(inst: Instance) -> list[tuple[str, ColType]]:
    """Distinct input column names in table order; first occurrence pins the
    type used for argument construction."""
    seen: dict[str, ColType] = {}
    out = []
    for table in inst.input_tables.values():
        for name, ctype in table.schema.columns:
            if name not in seen:
                seen[name] = ctype
                out.append((name, ctype))
    return out


def generated_column_names(inst: Instance) -> list[str]:
    """Names for aggregate-generated columns: expected-output columns that do
    not occur in any input table."""
    input_names = {name for t in inst.input_tables.values()
                   for name in t.column_names}
    return [c for c in inst.output_table.column_names if c not in input_names]


def build_argument_space(inst: Instance,
                         config: EnumerationConfig = EnumerationConfig()
                         ) -> ArgumentSpace:
    columns = _input_columns(inst)
    col_types = dict(columns)

    # Aggregate conditions first: they determine the generated names that
    # complete the universe.
    new_names = generated_column_names(inst)
    summarise_conds: list[tuple[SummariseCondition, bool]] = []
    for fn in inst.aggregators:
        if fn in ZERO_ARG_FNS:
            names = new_names or [fn]
            for name in names:
                summarise_conds.append(
                    (SummariseCondition(name, fn, None), is_window_fn(fn)))
            continue
        for col, ctype in columns:
            if aggregate_result_type(fn, ctype) is None:
                continue
            names = new_names or [f"{fn}_{col}"]
            for name in names:
                summarise_conds.append(
                    (SummariseCondition(name, fn, col), is_window_fn(fn)))

    universe_names = [name for name, _ in columns]
    for cond, _ in summarise_conds:
        if cond.new_column not in universe_names:
            universe_names.append(cond.new_column)
    universe = ColumnUniverse(universe_names, config.bitmask_width)

    # Filter atoms: comparison columns vs type-compatible constants, plus
    # equalities between same-typed comparison columns.
    atoms: list[FilterAtom] = []
    for col in inst.comparison_columns:
        ctype = col_types.get(col)
        if ctype is None:
            continue
        if config.text_ordering or ctype in NUMERIC_TYPES or \
                ctype is ColType.DATETIME:
            ops = dsl.COMPARATORS
        else:
            ops = ("==", "!=")
        for op in ops:
            for const in inst.constants:
                if _comparable(const, ctype):
                    atoms.append(FilterAtom(col, op, const))
    for i, c1 in enumerate(inst.comparison_columns):
        for c2 in inst.comparison_columns[i + 1:]:
            t1, t2 = col_types.get(c1), col_types.get(c2)
            if t1 is None or t2 is None or c1 == c2:
                continue
            if t1 == t2 or {t1, t2} <= NUMERIC_TYPES:
                atoms.append(FilterAtom(c1, "==", ColumnRef(c2)))

    filter_conds: list[FilterCondition] = [FilterCondition((a,)) for a in atoms]
    if config.max_filter_atoms >= 2:
        for a1, a2 in itertools.combinations(atoms, 2):
            for comb in ("and", "or"):
                filter_conds.append(FilterCondition((a1, a2), comb))

    # Join equalities: ordered pairs of same-family input columns.
    pairs: list[JoinCondition] = []
    for c1, t1 in columns:
        for c2, t2 in columns:
            if t1 is ColType.BOOL or t2 is ColType.BOOL:
                continue
            if t1 == t2 or {t1, t2} <= NUMERIC_TYPES:
                pairs.append(JoinCondition(c1, c2))

    # Groupings: subsets of universe columns up to the configured size.
    groupable = universe.names
    col_lists: list[tuple[str, ...]] = [()]
    for size in range(1, config.max_group_cols + 1):
        col_lists.extend(itertools.combinations(groupable, size))

    def ann(payload, ann1, ann2=0, window=False):
        return AnnotatedArgument(payload, ann1, ann2, window)

    return ArgumentSpace(
        universe=universe,
        filter_conditions=tuple(
            ann(c, universe.mask(c.columns())) for c in filter_conds),
        summarise_conditions=tuple(
            ann(c, universe.mask(c.used_columns()),
                universe.mask(c.generated_columns()), window)
            for c, window in summarise_conds),
        column_pairs=tuple(
            ann(p, universe.bit(p.left_column), universe.bit(p.right_column))
            for p in pairs),
        col_lists=tuple(ann(cs, universe.mask(cs)) for cs in col_lists),
        single_cols=tuple(ann(c, universe.bit(c)) for c in universe.names),
        input_masks={name: universe.mask(t.column_names)
                     for name, t in inst.input_tables.items()},
    )


# ---------------------------------------------------------------------------
# Premise checking over bitmasks
# ---------------------------------------------------------------------------

def check_premises(op: str, table_masks: Sequence[int],
                   extra: Optional[AnnotatedArgument],
                   cols: Optional[AnnotatedArgument] = None
                   ) -> Optional[int]:
    """Evaluate the inference-rule premise for one line.

    Returns the output column mask on success, None on failure.  `extra` is
    the condition/column argument where the operation has one; summarise
    passes both a condition and a grouping.
    """
    if op in ("natural_join", "natural_join3", "natural_join4", "union"):
        out = 0
        for m in table_masks:
            out |= m
        return out
    if op in ("left_join", "semi_join"):
        m1, m2 = table_masks
        if not m1 & m2:
            return None
        return m1 | m2 if op == "left_join" else m1
    if op == "inner_join":
        m1, m2 = table_masks
        if extra.ann1 & ~m1 or extra.ann2 & ~m2:
            return None
        return m1 | m2
    if op == "cross_join":
        m1, m2 = table_masks
        if extra.ann1 & ~m1 or extra.ann2 & ~(m1 & m2):
            return None
        return m1 | m2
    if op == "filter":
        (m1,) = table_masks
        if extra.ann1 & ~m1:
            return None
        return m1
    if op == "summarise":
        (m1,) = table_masks
        if extra.ann1 & ~m1 or cols.ann1 & ~m1 or cols.ann1 & extra.ann2:
            return None
        return extra.ann2 | cols.ann1
    if op == "mutate":
        (m1,) = table_masks
        if extra.ann1 & ~m1:
            return None
        return m1 | extra.ann2
    if op == "anti_join":
        m1, m2 = table_masks
        if extra.ann1 & ~m1 or extra.ann1 & ~m2:
            return None
        if not extra.ann1 and not m1 & m2:
            return None
        return m1
    if op == "intersect":
        m1, m2 = table_masks
        if extra.ann1 & ~m1 or extra.ann1 & ~m2:
            return None
        return extra.ann1
    raise ValueError(f"unknown operation {op!r}")


# ---------------------------------------------------------------------------
# Program enumeration
# ---------------------------------------------------------------------------

def line_name_prefix(inst: Instance) -> str:
    prefix = "df"
    while any(name.startswith(prefix) for name in inst.input_tables):
        prefix += "_"
    return prefix


def _condition_pool(space: ArgumentSpace, op: str):
    if op == "filter":
        return space.filter_conditions
    if op in ("inner_join", "cross_join"):
        return space.column_pairs
    if op == "summarise":
        # Reducing aggregates only; window results are row-aligned and belong
        # in mutate.
        return tuple(a for a in space.summarise_conditions if not a.window)
    if op == "mutate":
        return space.summarise_conditions
    if op == "anti_join":
        return space.col_lists
    if op == "intersect":
        return space.single_cols
    return None


def _enumerate_cube(space: ArgumentSpace, ops: Sequence[str], prefix: str,
                    check: bool) -> Iterator[dsl.Program]:
    """DFS over argument choices for a fixed op sequence.

    With check=False, premises are skipped (syntactic enumeration only);
    used by the brute-force pruning oracle.
    """
    n = len(ops)
    table_slots_after = [0] * (n + 1)
    for i in range(n - 1, -1, -1):
        n_tables = sum(1 for k in dsl.OPERATIONS[ops[i]] if k == dsl.TABLE)
        table_slots_after[i] = table_slots_after[i + 1] + n_tables

    env_names = list(space.input_masks)
    env_masks = dict(space.input_masks)
    lines: list[dsl.Line] = []
    use_counts: dict[str, int] = {}

    def recurse(i: int) -> Iterator[dsl.Program]:
        if i == n:
            yield dsl.Program(tuple(lines))
            return
        op = ops[i]
        out_name = f"{prefix}{i + 1}"
        sig = dsl.OPERATIONS[op]
        n_tables = sum(1 for k in sig if k == dsl.TABLE)
        pool = _condition_pool(space, op)

        # Dead-line pruning: outputs not yet consumed must fit in the
        # remaining table slots (the final line's own output excluded).
        unused = sum(1 for name in lines_outputs if not use_counts.get(name))
        if unused > table_slots_after[i]:
            return

        choices: list[Iterable] = [env_names] * n_tables
        if op == "summarise":
            choices.append(pool)
            choices.append(space.col_lists)
        elif pool is not None:
            choices.append(pool)

        for combo in itertools.product(*choices):
            tables = combo[:n_tables]
            rest = combo[n_tables:]
            masks = [env_masks[t] for t in tables]
            extra = rest[0] if rest else None
            cols_arg = rest[1] if len(rest) > 1 else None
            if check:
                out_mask = check_premises(op, masks, extra, cols_arg)
                if out_mask is None:
                    continue
            else:
                out_mask = 0
                for m in masks:
                    out_mask |= m

            args: tuple = tuple(tables)
            if op == "summarise":
                args += (extra.payload, cols_arg.payload)
            elif extra is not None:
                args += (extra.payload,)

            lines.append(dsl.Line(out_name, op, args))
            lines_outputs.append(out_name)
            env_names.append(out_name)
            env_masks[out_name] = out_mask
            for t in tables:
                use_counts[t] = use_counts.get(t, 0) + 1

            if i < n - 1 or all(
                    use_counts.get(name) for name in lines_outputs[:-1]):
                yield from recurse(i + 1)

            for t in tables:
                use_counts[t] -= 1
            del env_masks[out_name]
            env_names.pop()
            lines_outputs.pop()
            lines.pop()

    lines_outputs: list[str] = []
    yield from recurse(0)


def enumerate_programs(inst: Instance, space: ArgumentSpace,
                       shape, operations: Optional[Sequence[str]] = None,
                       prune: bool = True) -> Iterator[dsl.Program]:
    """Yield candidate programs for a cube (sequence of op names) or, given
    an integer bound, for every operation sequence of size 1..bound in
    lexicographic order."""
    prefix = line_name_prefix(inst)
    if isinstance(shape, int):
        ops_list = tuple(operations) if operations else dsl.OPERATION_ORDER
        for size in range(1, shape + 1):
            for seq in itertools.product(ops_list, repeat=size):
                yield from _enumerate_cube(space, seq, prefix, prune)
    else:
        yield from _enumerate_cube(space, tuple(shape), prefix, prune)
