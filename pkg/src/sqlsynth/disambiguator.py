"""Interactive disambiguation of candidate queries.

Given several queries that all satisfy the original example, repeatedly fuzz
the input database, group the candidates by the output they produce, and ask
the oracle whether one group's output is the intended one.  Each answer
discards every group on the wrong side; the loop ends with a single query or
an indistinguishable class, in which case the earliest-discovered query wins.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Mapping, Optional, Protocol, Sequence

from .dsl import Program
from .fuzzer import FuzzConfig, fuzz_database
from .instance import Instance
from .relational import (EngineError, Table, apply_line, lax_canonical,
                         row_sort_key)
from .verifier import Projection, project

ERROR_KEY = ("error",)


class OracleAbort(Exception):
    """The oracle gave up; callers fall back to the earliest candidate."""


class Oracle(Protocol):
    def answer(self, tables: Mapping[str, Table], output: Table) -> bool:
        """Is `output` the correct result for the fuzzed `tables`?"""


@dataclass(frozen=True)
class Candidate:
    program: Program
    projection: Projection
    sql: str
    order: int  # discovery index from synthesis


def execute_candidate(candidate: Candidate,
                      tables: Mapping[str, Table]) -> Table:
    env = dict(tables)
    result = None
    for line in candidate.program.lines:
        result = apply_line(line.op, line.args, env)
        env[line.output] = result
    return project(result, candidate.projection)


def canonical_key(table: Table) -> tuple:
    """Lax canonical form: sorted coerced rows, minimized over column
    permutations so renamed/reordered columns compare equal."""
    grid = [tuple(lax_canonical(v) for v in row) for row in table.rows]
    n = len(table.schema)
    if n == 0:
        return ("empty",)
    best_key = None
    best_rows = None
    for perm in itertools.permutations(range(n)):
        rows = tuple(sorted((tuple(row[i] for i in perm) for row in grid),
                            key=row_sort_key))
        key = tuple(row_sort_key(row) for row in rows)
        if best_key is None or key < best_key:
            best_key, best_rows = key, rows
    return ("ok", n, best_rows)


@dataclass
class Group:
    key: tuple
    output: Optional[Table]  # None for the error group
    members: list[Candidate]

    @property
    def is_error(self) -> bool:
        return self.output is None


@dataclass
class Split:
    tables: dict[str, Table]
    groups: list[Group]
    round_index: int
    question_group: int = -1
    metric: float = float("inf")


def group_by_output(candidates: Sequence[Candidate],
                    tables: Mapping[str, Table],
                    round_index: int = 0) -> Split:
    groups: dict[tuple, Group] = {}
    for cand in candidates:
        try:
            output = execute_candidate(cand, tables)
            key = canonical_key(output)
        except EngineError:
            output, key = None, ERROR_KEY
        group = groups.get(key)
        if group is None:
            groups[key] = Group(key, output, [cand])
        else:
            group.members.append(cand)
    split = Split(dict(tables), list(groups.values()), round_index)
    _choose_question(split, len(candidates))
    return split


def _choose_question(split: Split, n: int) -> None:
    """Pick the non-error group whose size is closest to half of n."""
    for i, group in enumerate(split.groups):
        if group.is_error:
            continue
        metric = abs(len(group.members) - n / 2)
        if metric < split.metric:
            split.metric = metric
            split.question_group = i


def better_split(best: Optional[Split], candidate: Split) -> bool:
    """Candidate wins with at least two groups and a question group closer
    to an even split; ties favor more groups, then the earlier candidate."""
    if len(candidate.groups) < 2 or candidate.question_group < 0:
        return False
    if best is None:
        return True
    if candidate.metric != best.metric:
        return candidate.metric < best.metric
    return len(candidate.groups) > len(best.groups)


@dataclass
class SessionEntry:
    tables: dict[str, Table]
    output: Table
    answer: bool
    before: int
    after: int


@dataclass
class DisambiguationResult:
    chosen: Candidate
    log: list[SessionEntry] = field(default_factory=list)
    aborted: bool = False
    final_set: list[Candidate] = field(default_factory=list)

    @property
    def questions_asked(self) -> int:
        return len(self.log)


def _earliest(candidates: Sequence[Candidate]) -> Candidate:
    return min(candidates, key=lambda c: c.order)


def find_best_split(candidates: Sequence[Candidate], inst: Instance,
                    rounds: int, seed, level: int) -> Optional[Split]:
    best: Optional[Split] = None
    programs = [c.program for c in candidates]
    for i in range(rounds):
        round_seed = f"{seed}:{level}:{i}"
        fuzzed = fuzz_database(inst.input_tables, programs,
                               inst.foreign_keys,
                               FuzzConfig(seed=random.Random(round_seed)
                                          .getrandbits(63)))
        split = group_by_output(candidates, fuzzed, i)
        if better_split(best, split):
            best = split
    return best


def disambiguate(candidates: Sequence[Candidate], inst: Instance,
                 oracle: Oracle, rounds: int = 16,
                 seed: int = 0) -> DisambiguationResult:
    """Shrink the candidate set with yes/no questions until one query (or an
    indistinguishable class, represented by its earliest member) remains."""
    if not candidates:
        raise ValueError("no candidates to disambiguate")
    current = sorted(candidates, key=lambda c: c.order)
    log: list[SessionEntry] = []
    level = 0
    while len(current) > 1:
        best = find_best_split(current, inst, rounds, seed, level)
        if best is None:
            break
        group = best.groups[best.question_group]
        try:
            answer = oracle.answer(best.tables, group.output)
        except OracleAbort:
            return DisambiguationResult(
                chosen=_earliest(current), log=log, aborted=True,
                final_set=list(current))
        before = len(current)
        if answer:
            current = list(group.members)
        else:
            kept = set(id(c) for c in group.members)
            current = [c for c in current if id(c) not in kept]
        log.append(SessionEntry(best.tables, group.output, answer,
                                before, len(current)))
        level += 1
    return DisambiguationResult(
        chosen=_earliest(current), log=log, final_set=list(current))


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------

class GroundTruthOracle:
    """Answers by executing a reference query and comparing laxly."""

    def __init__(self, truth):
        self.truth = truth  # SQL text or Program

    def answer(self, tables: Mapping[str, Table], output: Table) -> bool:
        from .fuzzy_eval import run_query
        from .relational import tables_equal_lax
        expected = run_query(self.truth, tables)
        return tables_equal_lax(expected, output)


class ScriptedOracle:
    """Replays a fixed list of answers; raises OracleAbort when exhausted."""

    def __init__(self, answers: Sequence[bool]):
        self.answers = list(answers)
        self.position = 0

    def answer(self, tables, output) -> bool:
        if self.position >= len(self.answers):
            raise OracleAbort("scripted answers exhausted")
        value = self.answers[self.position]
        self.position += 1
        return value
