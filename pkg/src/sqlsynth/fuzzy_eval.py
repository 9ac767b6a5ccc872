"""Fuzzing-based equivalence check between a synthesized query and a ground
truth.

A mismatch on any fuzzed database proves the queries differ and carries the
distinguishing input as a re-checkable witness.  Agreement across every
round is only absence of evidence, reported as "possibly correct".
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .dsl import Program
from .fuzzer import FuzzConfig, fuzz_database
from .instance import ForeignKey
from .relational import EngineError, Table, tables_equal_lax
from .sqlgen import run_sql

POSSIBLY_CORRECT = "possibly_correct"
INCORRECT_BY_FUZZING = "incorrect_by_fuzzing"
INCONCLUSIVE = "inconclusive"
EXECUTION_ERROR = "execution_error"


@dataclass
class EvalVerdict:
    kind: str
    round_index: Optional[int] = None
    witness: Optional[dict[str, Table]] = None
    elapsed: float = 0.0

    @property
    def incorrect(self) -> bool:
        return self.kind == INCORRECT_BY_FUZZING


def run_query(query, tables: Mapping[str, Table]) -> Table:
    """Execute a query in whatever form it comes: SQL text through the
    embedded engine, a Program (optionally with a projection) natively."""
    if isinstance(query, str):
        try:
            return run_sql(query, tables)
        except Exception as exc:  # sqlite errors carry many types
            raise EngineError(str(exc)) from exc
    if isinstance(query, Program):
        from .relational import apply_line
        env = dict(tables)
        result = None
        for line in query.lines:
            result = apply_line(line.op, line.args, env)
            env[line.output] = result
        return result
    if hasattr(query, "program") and hasattr(query, "projection"):
        from .disambiguator import execute_candidate
        return execute_candidate(query, tables)
    raise TypeError(f"cannot execute query of type {type(query)!r}")


def fuzzy_check(candidate, truth, tables: Mapping[str, Table],
                fks: Sequence[ForeignKey] = (), rounds: int = 16,
                per_round_timeout: float = 60.0, seed: int = 0) -> EvalVerdict:
    """Decide whether `candidate` is fuzz-distinguishable from `truth`.

    Checks the original database first, then `rounds` fuzzed databases built
    from the truth's constants.  The first mismatch is definitive; running
    out of rounds yields possibly-correct, running out of time inconclusive.
    """
    start = time.monotonic()
    truth_output = run_query(truth, tables)

    try:
        candidate_output = run_query(candidate, tables)
    except EngineError:
        return EvalVerdict(EXECUTION_ERROR, elapsed=time.monotonic() - start)
    if not tables_equal_lax(truth_output, candidate_output):
        return EvalVerdict(INCORRECT_BY_FUZZING, round_index=0,
                           witness=dict(tables),
                           elapsed=time.monotonic() - start)

    for i in range(1, rounds + 1):
        round_start = time.monotonic()
        config = FuzzConfig(seed=_round_seed(seed, i))
        fuzzed = fuzz_database(tables, [truth], fks, config)
        try:
            truth_out = run_query(truth, fuzzed)
            cand_out = run_query(candidate, fuzzed)
        except EngineError:
            return EvalVerdict(EXECUTION_ERROR, round_index=i,
                               elapsed=time.monotonic() - start)
        if not tables_equal_lax(truth_out, cand_out):
            return EvalVerdict(INCORRECT_BY_FUZZING, round_index=i,
                               witness=fuzzed,
                               elapsed=time.monotonic() - start)
        if time.monotonic() - round_start > per_round_timeout:
            return EvalVerdict(INCONCLUSIVE, round_index=i,
                               elapsed=time.monotonic() - start)
    return EvalVerdict(POSSIBLY_CORRECT, round_index=rounds,
                       elapsed=time.monotonic() - start)


def _round_seed(seed: int, round_index: int) -> int:
    import random
    return random.Random(f"{seed}:{round_index}").getrandbits(63)


def recheck_witness(candidate, truth, verdict: EvalVerdict) -> bool:
    """Confirm an incorrect-by-fuzzing verdict by replaying its witness."""
    if not verdict.incorrect or verdict.witness is None:
        return False
    truth_out = run_query(truth, verdict.witness)
    try:
        cand_out = run_query(candidate, verdict.witness)
    except EngineError:
        return True
    return not tables_equal_lax(truth_out, cand_out)
