from __future__ import annotations

from pathlib import Path

import pytest

from sqlsynth.fuzzy_eval import (EXECUTION_ERROR, INCORRECT_BY_FUZZING,
                                 POSSIBLY_CORRECT, fuzzy_check,
                                 recheck_witness, run_query)
from sqlsynth.instance import ForeignKey, load_instance
from sqlsynth.relational import ColType, Table

FIG1 = Path(__file__).resolve().parent.parent / "benchmarks" / "fig1"

COUNT_QUERY = ("SELECT CourseName, count(*) AS GradeCount FROM Grades "
               "NATURAL JOIN Courses GROUP BY CourseName")
FILTERED_QUERY = ("SELECT CourseName, count(*) AS GradeCount FROM Grades "
                  "NATURAL JOIN Courses WHERE Grade = 'A' GROUP BY CourseName")


@pytest.fixture(scope="module")
def fig1():
    return load_instance(FIG1 / "manifest.json")


@pytest.fixture(scope="module")
def all_a_tables(fig1):
    """Fig.-style schema where every grade is 'A', so the filtered variant
    agrees on the original input and only fuzzing can separate the two."""
    grades = fig1.input_tables["Grades"]
    rows = tuple((cid, sid, "A") for cid, sid, _ in grades.rows)
    return {"Grades": Table(grades.schema, rows),
            "Courses": fig1.input_tables["Courses"]}


def test_identical_queries_possibly_correct(fig1):
    verdict = fuzzy_check(COUNT_QUERY, COUNT_QUERY, fig1.input_tables,
                          fig1.foreign_keys, rounds=4, seed=0)
    assert verdict.kind == POSSIBLY_CORRECT


def test_filter_variant_caught_by_fuzzing(fig1, all_a_tables):
    sanity = run_query(COUNT_QUERY, all_a_tables)
    assert sanity.rows == run_query(FILTERED_QUERY, all_a_tables).rows
    verdict = fuzzy_check(FILTERED_QUERY, COUNT_QUERY, all_a_tables,
                          fig1.foreign_keys, rounds=16, seed=1)
    assert verdict.kind == INCORRECT_BY_FUZZING
    assert 1 <= verdict.round_index <= 16
    assert recheck_witness(FILTERED_QUERY, COUNT_QUERY, verdict)


def test_mismatch_on_original_input_is_round_zero(fig1):
    verdict = fuzzy_check(FILTERED_QUERY, COUNT_QUERY, fig1.input_tables,
                          fig1.foreign_keys, rounds=16, seed=1)
    assert verdict.kind == INCORRECT_BY_FUZZING
    assert verdict.round_index == 0
    assert recheck_witness(FILTERED_QUERY, COUNT_QUERY, verdict)


def test_fk_respecting_difference_stays_possibly_correct(fig1):
    truth = "SELECT CourseID FROM Grades"
    candidate = ("SELECT CourseID FROM Grades WHERE CourseID IN "
                 "(SELECT CourseID FROM Courses)")
    verdict = fuzzy_check(candidate, truth, fig1.input_tables,
                          fig1.foreign_keys, rounds=16, seed=2)
    assert verdict.kind == POSSIBLY_CORRECT
    # Without the declared foreign key the fuzzer separates them quickly.
    verdict = fuzzy_check(candidate, truth, fig1.input_tables, [],
                          rounds=16, seed=2)
    assert verdict.kind == INCORRECT_BY_FUZZING


def test_broken_candidate_execution_error(fig1):
    verdict = fuzzy_check("SELECT nope FROM Grades", COUNT_QUERY,
                          fig1.input_tables, fig1.foreign_keys, rounds=4)
    assert verdict.kind == EXECUTION_ERROR


def test_monotonic_in_rounds(fig1, all_a_tables):
    early = fuzzy_check(FILTERED_QUERY, COUNT_QUERY, all_a_tables,
                        fig1.foreign_keys, rounds=16, seed=1)
    assert early.kind == INCORRECT_BY_FUZZING
    more = fuzzy_check(FILTERED_QUERY, COUNT_QUERY, all_a_tables,
                       fig1.foreign_keys, rounds=32, seed=1)
    assert more.kind == INCORRECT_BY_FUZZING
    assert more.round_index == early.round_index
