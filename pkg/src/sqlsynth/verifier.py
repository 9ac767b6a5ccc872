"""Candidate verification: execute, score, and match against the expected
output.

A candidate satisfies the instance when some injective column mapping onto
the expected schema makes the row multisets strictly equal.  Scoring is the
cheap value-overlap ratio used to steer cube generation; any score below 1
is a certain reject, which lets `satisfies` skip the projection search for
almost every candidate.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Optional

from .dsl import Program
from .instance import Instance
from .relational import (EngineError, Schema, Table, apply_line,
                         unique_values)


@dataclass(frozen=True)
class Projection:
    """Injective mapping of expected-output columns onto candidate columns."""

    pairs: tuple[tuple[str, str], ...]  # (expected column, candidate column)


def execute(prog: Program, inst: Instance) -> Table:
    env: dict[str, Table] = dict(inst.input_tables)
    result = None
    for line in prog.lines:
        result = apply_line(line.op, line.args, env)
        env[line.output] = result
    if result is None:
        raise EngineError("empty program")
    return result


def score(output: Table, expected: Table) -> float:
    expected_values = unique_values(expected)
    if not expected_values:
        return 1.0
    overlap = unique_values(output) & expected_values
    return len(overlap) / len(expected_values)


def project(table: Table, projection: Projection) -> Table:
    indices = [table.schema.index_of(src) for _, src in projection.pairs]
    columns = tuple(
        (out, table.schema.types[i])
        for (out, _), i in zip(projection.pairs, indices))
    rows = tuple(tuple(row[i] for i in indices) for row in table.rows)
    return Table(Schema(columns), rows)


def satisfies(output: Table, expected: Table,
              quick_reject: bool = True) -> Optional[Projection]:
    """First projection (lexicographic over expected columns x candidate
    schema order) under which the projected multiset equals `expected`."""
    if quick_reject and score(output, expected) < 1.0:
        return None
    if len(output.rows) != len(expected.rows):
        return None
    if len(output.schema) < len(expected.schema):
        return None

    expected_cols = [Counter(expected.column(c)) for c in expected.column_names]
    candidate_cols = [Counter(output.column(c)) for c in output.column_names]
    candidates = [
        [j for j, cc in enumerate(candidate_cols) if cc == ec]
        for ec in expected_cols
    ]
    if any(not c for c in candidates):
        return None

    target = Counter(expected.rows)
    names = output.column_names
    n = len(expected.schema)

    def assign(i: int, used: list[int]) -> Optional[list[int]]:
        if i == n:
            projected = Counter(
                tuple(row[j] for j in used) for row in output.rows)
            return list(used) if projected == target else None
        for j in candidates[i]:
            if j in used:
                continue
            used.append(j)
            found = assign(i + 1, used)
            if found is not None:
                return found
            used.pop()
        return None

    solution = assign(0, [])
    if solution is None:
        return None
    return Projection(tuple(
        (exp, names[j]) for exp, j in zip(expected.column_names, solution)))
