from __future__ import annotations

import pytest

from sqlsynth.dsl import (EmptyProgram, FilterAtom, FilterCondition, Line,
                          Program, RuleViolation, SummariseCondition,
                          JoinCondition, validate)

SCHEMAS = {
    "Grades": ("CourseID", "StudentID", "Grade"),
    "Courses": ("CourseID", "CourseName"),
}


def test_filter_on_missing_column_rejected():
    prog = Program((Line("df1", "filter",
                         ("Courses",
                          FilterCondition((FilterAtom("grade", "==", "A"),)))),))
    with pytest.raises(RuleViolation) as exc:
        validate(prog, SCHEMAS)
    assert exc.value.rule == "Filter"


def test_mutate_adds_generated_column():
    prog = Program((Line("df1", "mutate",
                         ("Grades",
                          SummariseCondition("maxStudentID", "max", "StudentID"))),))
    sets = validate(prog, SCHEMAS)
    assert sets[0] == frozenset(
        {"CourseID", "StudentID", "Grade", "maxStudentID"})


def test_empty_program_rejected():
    with pytest.raises(EmptyProgram):
        validate(Program(()), SCHEMAS)


def test_forward_reference_rejected():
    prog = Program((
        Line("df1", "natural_join", ("df2", "Courses")),
        Line("df2", "filter",
             ("Grades", FilterCondition((FilterAtom("Grade", "==", "A"),)))),
    ))
    with pytest.raises(RuleViolation) as exc:
        validate(prog, SCHEMAS)
    assert exc.value.rule == "ForwardReference"


def test_single_assignment_enforced():
    cond = FilterCondition((FilterAtom("Grade", "==", "A"),))
    prog = Program((
        Line("df1", "filter", ("Grades", cond)),
        Line("df1", "filter", ("Grades", cond)),
    ))
    with pytest.raises(RuleViolation) as exc:
        validate(prog, SCHEMAS)
    assert exc.value.rule == "SingleAssignment"


def test_column_sets_propagate_through_lines():
    prog = Program((
        Line("df1", "natural_join", ("Grades", "Courses")),
        Line("df2", "summarise",
             ("df1", SummariseCondition("GradeCount", "n", None),
              ("CourseName",))),
    ))
    sets = validate(prog, SCHEMAS)
    assert sets[0] == frozenset({"CourseID", "StudentID", "Grade", "CourseName"})
    assert sets[1] == frozenset({"CourseName", "GradeCount"})


def test_cross_join_second_column_must_be_shared():
    prog = Program((Line("df1", "cross_join",
                         ("Grades", "Courses",
                          JoinCondition("StudentID", "CourseName"))),))
    with pytest.raises(RuleViolation) as exc:
        validate(prog, SCHEMAS)
    assert exc.value.rule == "CrossJoin"
