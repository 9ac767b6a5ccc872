from __future__ import annotations

import pytest

from sqlsynth.relational import ColType, Table

INT = ColType.INT
TEXT = ColType.TEXT
REAL = ColType.REAL


GRADES_ROWS = [
    (10, 36933, "A"),
    (11, 36933, "B"),
    (12, 36933, "A"),
    (10, 37362, "A"),
    (12, 37362, "C"),
    (11, 37453, "A"),
    (10, 37510, "B"),
    (12, 37510, "A"),
    (10, 37955, "A"),
]

COURSES_ROWS = [
    (10, "Programming"),
    (11, "Algorithms"),
    (12, "Databases"),
]

GRADES_PER_COURSE = [
    ("Programming", 4),
    ("Algorithms", 2),
    ("Databases", 3),
]


@pytest.fixture
def grades() -> Table:
    return Table.from_rows(
        [("CourseID", INT), ("StudentID", INT), ("Grade", TEXT)], GRADES_ROWS)


@pytest.fixture
def courses() -> Table:
    return Table.from_rows(
        [("CourseID", INT), ("CourseName", TEXT)], COURSES_ROWS)


@pytest.fixture
def grades_per_course() -> Table:
    return Table.from_rows(
        [("CourseName", TEXT), ("GradeCount", INT)], GRADES_PER_COURSE)
