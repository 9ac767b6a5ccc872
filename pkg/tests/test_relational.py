from __future__ import annotations

from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqlsynth import dsl, relational
from sqlsynth.dsl import (ColumnRef, FilterAtom, FilterCondition,
                          JoinCondition, SummariseCondition)
from sqlsynth.relational import (ColType, NonUnionCompatible, Table,
                                 TypeMismatch, UnknownColumn, apply_line,
                                 tables_equal_lax, tables_equal_strict,
                                 unique_values)

INT = ColType.INT
REAL = ColType.REAL
TEXT = ColType.TEXT


def t(columns, rows):
    return Table.from_rows(columns, rows)


# Hand-executed join of the 9-row grades table with the 3-row courses table.
JOINED_ROWS = [
    (10, 36933, "A", "Programming"),
    (11, 36933, "B", "Algorithms"),
    (12, 36933, "A", "Databases"),
    (10, 37362, "A", "Programming"),
    (12, 37362, "C", "Databases"),
    (11, 37453, "A", "Algorithms"),
    (10, 37510, "B", "Programming"),
    (12, 37510, "A", "Databases"),
    (10, 37955, "A", "Programming"),
]


class TestJoins:
    def test_natural_join_grades_courses(self, grades, courses):
        out = apply_line("natural_join", ("g", "c"), {"g": grades, "c": courses})
        assert out.column_names == ("CourseID", "StudentID", "Grade", "CourseName")
        assert Counter(out.rows) == Counter(JOINED_ROWS)
        assert len(out) == 9

    def test_natural_join_no_shared_is_cross_product(self):
        a = t([("x", INT)], [(1,), (2,)])
        b = t([("y", TEXT)], [("p",), ("q",)])
        out = apply_line("natural_join", ("a", "b"), {"a": a, "b": b})
        assert out.column_names == ("x", "y")
        assert len(out) == 4

    def test_natural_join_null_key_never_matches(self):
        a = t([("k", INT), ("v", INT)], [(None, 1), (2, 2)])
        b = t([("k", INT), ("w", INT)], [(None, 10), (2, 20)])
        out = relational.natural_join(a, b)
        assert out.rows == ((2, 2, 20),)

    def test_left_join_null_fills(self):
        a = t([("k", INT)], [(1,), (2,)])
        b = t([("k", INT), ("v", TEXT)], [(1, "x")])
        out = relational.left_join(a, b)
        assert Counter(out.rows) == Counter([(1, "x"), (2, None)])

    def test_left_join_requires_shared_columns(self):
        a = t([("x", INT)], [(1,)])
        b = t([("y", INT)], [(1,)])
        with pytest.raises(UnknownColumn):
            apply_line("left_join", ("a", "b"), {"a": a, "b": b})

    def test_inner_join_explicit_condition(self):
        a = t([("id", INT), ("v", TEXT)], [(1, "a"), (2, "b")])
        b = t([("ref", INT), ("w", TEXT)], [(2, "x"), (2, "y"), (3, "z")])
        out = apply_line("inner_join", ("a", "b", JoinCondition("id", "ref")),
                         {"a": a, "b": b})
        assert out.column_names == ("id", "v", "ref", "w")
        assert Counter(out.rows) == Counter([(2, "b", 2, "x"), (2, "b", 2, "y")])

    def test_cross_join_condition_column_shared(self):
        a = t([("id", INT), ("k", INT)], [(1, 5), (2, 6)])
        b = t([("k", INT), ("w", TEXT)], [(1, "m"), (6, "n")])
        out = apply_line("cross_join", ("a", "b", JoinCondition("id", "k")),
                         {"a": a, "b": b})
        # Joins a.id against b.k; shared column k keeps the left value.
        assert out.column_names == ("id", "k", "w")
        assert out.rows == ((1, 5, "m"),)

    def test_cross_join_premise_rechecked(self):
        a = t([("id", INT)], [(1,)])
        b = t([("w", INT)], [(1,)])
        with pytest.raises(UnknownColumn):
            apply_line("cross_join", ("a", "b", JoinCondition("id", "w")),
                       {"a": a, "b": b})

    def test_semi_and_anti_join_partition_left(self):
        a = t([("k", INT), ("v", INT)], [(1, 1), (2, 2), (3, 3)])
        b = t([("k", INT)], [(2,), (3,)])
        semi = apply_line("semi_join", ("a", "b"), {"a": a, "b": b})
        anti = apply_line("anti_join", ("a", "b", ()), {"a": a, "b": b})
        assert Counter(semi.rows) == Counter([(2, 2), (3, 3)])
        assert Counter(anti.rows) == Counter([(1, 1)])

    def test_anti_join_explicit_columns(self):
        a = t([("k", INT), ("v", INT)], [(1, 9), (2, 9)])
        b = t([("k", INT), ("other", INT)], [(1, 0)])
        out = apply_line("anti_join", ("a", "b", ("k",)), {"a": a, "b": b})
        assert out.rows == ((2, 9),)


class TestSummarise:
    def test_fig_counts(self, grades, courses, grades_per_course):
        joined = relational.natural_join(grades, courses)
        cond = SummariseCondition("GradeCount", "n", None)
        out = relational.summarise(joined, cond, ("CourseName",))
        assert tables_equal_strict(out, grades_per_course)

    def test_summarise_without_groups_single_row(self):
        table = t([("x", INT)], [(1,), (2,)])
        out = relational.summarise(table, SummariseCondition("s", "sum", "x"), ())
        assert out.rows == ((3,),)

    def test_summarise_empty_table_no_groups(self):
        table = t([("x", INT)], [])
        out = relational.summarise(table, SummariseCondition("c", "n", None), ())
        assert out.rows == ((0,),)
        grouped = relational.summarise(
            table, SummariseCondition("c", "n", None), ("x",))
        assert grouped.rows == ()

    def test_null_groups_with_null(self):
        table = t([("g", TEXT), ("x", INT)], [(None, 1), (None, 2), ("a", 3)])
        out = relational.summarise(table, SummariseCondition("c", "n", None), ("g",))
        assert Counter(out.rows) == Counter([(None, 2), ("a", 1)])

    def test_sum_ignores_nulls_and_empty_is_null(self):
        table = t([("g", TEXT), ("x", INT)],
                  [("a", 1), ("a", None), ("b", None)])
        out = relational.summarise(table, SummariseCondition("s", "sum", "x"), ("g",))
        assert Counter(out.rows) == Counter([("a", 1), ("b", None)])

    def test_mean_median_mode(self):
        table = t([("x", INT)], [(1,), (2,), (2,), (5,)])
        mean = relational.summarise(table, SummariseCondition("m", "mean", "x"), ())
        assert mean.rows == ((2.5,),)
        median = relational.summarise(table, SummariseCondition("m", "median", "x"), ())
        assert median.rows == ((2.0,),)
        mode = relational.summarise(table, SummariseCondition("m", "mode", "x"), ())
        assert mode.rows == ((2,),)

    def test_n_distinct_ignores_nulls(self):
        table = t([("x", TEXT)], [("a",), ("a",), (None,), ("b",)])
        out = relational.summarise(
            table, SummariseCondition("d", "n_distinct", "x"), ())
        assert out.rows == ((2,),)

    def test_generated_column_collision_rejected(self):
        table = t([("x", INT)], [(1,)])
        with pytest.raises(UnknownColumn):
            apply_line("summarise", ("T", SummariseCondition("x", "n", None), ("x",)),
                       {"T": table})


class TestMutate:
    def test_reducing_broadcast(self):
        table = t([("StudentID", INT)], [(3,), (7,), (5,)])
        out = relational.mutate(
            table, SummariseCondition("maxStudentID", "max", "StudentID"))
        assert out.column_names == ("StudentID", "maxStudentID")
        assert out.rows == ((3, 7), (7, 7), (5, 7))

    def test_cumsum_skips_nulls(self):
        table = t([("x", INT)], [(None,), (1,), (2,)])
        out = relational.mutate(table, SummariseCondition("c", "cumsum", "x"))
        assert [r[-1] for r in out.rows] == [None, 1, 3]

    def test_lead_lag_row_number(self):
        table = t([("x", INT)], [(10,), (20,), (30,)])
        lead = relational.mutate(table, SummariseCondition("l", "lead", "x"))
        assert [r[-1] for r in lead.rows] == [20, 30, None]
        lag = relational.mutate(table, SummariseCondition("l", "lag", "x"))
        assert [r[-1] for r in lag.rows] == [None, 10, 20]
        rn = relational.mutate(table, SummariseCondition("r", "row_number", None))
        assert [r[-1] for r in rn.rows] == [1, 2, 3]

    def test_rank_ties_share_rank(self):
        table = t([("x", INT)], [(5,), (3,), (5,), (1,)])
        out = relational.mutate(table, SummariseCondition("r", "rank", "x"))
        assert [r[-1] for r in out.rows] == [3, 2, 3, 1]

    def test_mutate_overwrites_existing_column(self):
        table = t([("x", INT)], [(1,), (2,)])
        out = relational.mutate(table, SummariseCondition("x", "cumsum", "x"))
        assert out.column_names == ("x",)
        assert out.rows == ((1,), (3,))

    def test_window_fn_inapplicable_type(self):
        table = t([("x", TEXT)], [("a",)])
        with pytest.raises(TypeMismatch):
            relational.mutate(table, SummariseCondition("c", "cumsum", "x"))


class TestFilter:
    def test_constant_filter(self, grades):
        cond = FilterCondition((FilterAtom("Grade", "==", "A"),))
        out = apply_line("filter", ("g", cond), {"g": grades})
        assert len(out) == 6
        assert all(r[2] == "A" for r in out.rows)

    def test_empty_result_keeps_schema(self, grades):
        cond = FilterCondition((FilterAtom("Grade", "==", "x"),))
        out = apply_line("filter", ("g", cond), {"g": grades})
        assert out.column_names == grades.column_names
        assert len(out) == 0

    def test_null_never_satisfies(self):
        table = t([("x", INT)], [(None,), (1,)])
        neq = FilterCondition((FilterAtom("x", "!=", 5),))
        out = relational._evaluate_filter(table, neq)
        assert out.rows == ((1,),)

    def test_column_column_atom(self):
        table = t([("a", INT), ("b", INT)], [(1, 1), (1, 2)])
        cond = FilterCondition((FilterAtom("a", "==", ColumnRef("b")),))
        out = relational._evaluate_filter(table, cond)
        assert out.rows == ((1, 1),)

    def test_compound_or(self):
        table = t([("x", INT)], [(1,), (5,), (9,)])
        cond = FilterCondition(
            (FilterAtom("x", "<", 2), FilterAtom("x", ">", 8)), "or")
        out = relational._evaluate_filter(table, cond)
        assert Counter(out.rows) == Counter([(1,), (9,)])

    def test_type_mismatch_raises(self):
        table = t([("x", INT)], [(1,)])
        cond = FilterCondition((FilterAtom("x", "==", "one"),))
        with pytest.raises(TypeMismatch):
            relational._evaluate_filter(table, cond)

    def test_missing_column_rejected(self, courses):
        cond = FilterCondition((FilterAtom("grade", "==", "A"),))
        with pytest.raises(UnknownColumn):
            apply_line("filter", ("c", cond), {"c": courses})


class TestSetOps:
    def test_union_is_multiset(self):
        a = t([("x", INT)], [(1,), (2,)])
        b = t([("x", INT)], [(2,), (3,)])
        out = apply_line("union", ("a", "b"), {"a": a, "b": b})
        assert Counter(out.rows) == Counter([(1,), (2,), (2,), (3,)])

    def test_union_reorders_columns(self):
        a = t([("x", INT), ("y", TEXT)], [(1, "a")])
        b = t([("y", TEXT), ("x", INT)], [("b", 2)])
        out = relational.union(a, b)
        assert out.column_names == ("x", "y")
        assert Counter(out.rows) == Counter([(1, "a"), (2, "b")])

    def test_union_incompatible(self):
        a = t([("x", INT)], [(1,)])
        b = t([("y", INT)], [(1,)])
        with pytest.raises(NonUnionCompatible):
            relational.union(a, b)

    def test_intersect_single_column_set_semantics(self):
        a = t([("x", INT), ("junk", TEXT)], [(1, "j"), (2, "j"), (2, "k")])
        b = t([("x", INT)], [(2,), (2,), (3,)])
        out = apply_line("intersect", ("a", "b", "x"), {"a": a, "b": b})
        assert out.column_names == ("x",)
        assert out.rows == ((2,),)


class TestComparisons:
    def test_strict_reflexive_and_order_insensitive(self, grades_per_course):
        shuffled = Table(grades_per_course.schema,
                         tuple(reversed(grades_per_course.rows)))
        assert tables_equal_strict(grades_per_course, grades_per_course)
        assert tables_equal_strict(grades_per_course, shuffled)

    def test_strict_cell_mismatch(self, grades_per_course):
        rows = list(grades_per_course.rows)
        rows[0] = ("Programming", 5)
        other = Table(grades_per_course.schema, tuple(rows))
        assert not tables_equal_strict(grades_per_course, other)

    def test_lax_numeric_text_coercion(self):
        a = t([("n", INT), ("s", TEXT)], [(1, "a")])
        b = t([("n", TEXT), ("s", TEXT)], [("1", "a")])
        assert tables_equal_lax(a, b)

    def test_lax_column_permutation(self):
        a = t([("x", INT), ("y", TEXT)], [(1, "a"), (2, "b")])
        b = t([("p", TEXT), ("q", INT)], [("a", 1), ("b", 2)])
        assert tables_equal_lax(a, b)

    def test_lax_distinct_data(self):
        assert not tables_equal_lax(t([("x", INT)], [(1,)]),
                                    t([("x", INT)], [(2,)]))

    def test_lax_int_real_equivalence(self):
        a = t([("x", INT)], [(1,)])
        b = t([("x", REAL)], [(1.0,)])
        assert tables_equal_lax(a, b)

    def test_unique_values_fig_output(self, grades_per_course):
        assert unique_values(grades_per_course) == {
            "Programming", "Algorithms", "Databases", 4, 2, 3}

    def test_unique_values_trivial(self):
        assert unique_values(t([("x", INT)], [])) == set()
        assert unique_values(t([("x", INT)], [(7,)])) == {7}


# ---------------------------------------------------------------------------
# Property tests over random small tables
# ---------------------------------------------------------------------------

@st.composite
def small_tables(draw, min_cols=1, max_cols=3):
    n_cols = draw(st.integers(min_cols, max_cols))
    names = [f"c{i}" for i in range(n_cols)]
    types = [draw(st.sampled_from([INT, TEXT])) for _ in range(n_cols)]
    n_rows = draw(st.integers(0, 5))
    rows = []
    for _ in range(n_rows):
        row = []
        for ty in types:
            if draw(st.booleans()) and draw(st.integers(0, 9)) == 0:
                row.append(None)
            elif ty is INT:
                row.append(draw(st.integers(-3, 3)))
            else:
                row.append(draw(st.sampled_from(["a", "b", "c"])))
        rows.append(tuple(row))
    return Table.from_rows(list(zip(names, types)), rows)


@given(small_tables())
@settings(max_examples=60, deadline=None)
def test_filter_output_subset_of_input(table):
    cond = FilterCondition((FilterAtom("c0", "!=", 0 if
                                       table.schema.types[0] is INT else "a"),))
    out = relational._evaluate_filter(table, cond)
    assert Counter(out.rows) - Counter(table.rows) == Counter()


@given(small_tables(), small_tables())
@settings(max_examples=60, deadline=None)
def test_union_counts_add(a, b):
    try:
        out = relational.union(a, b)
    except NonUnionCompatible:
        return
    assert len(out) == len(a) + len(b)


@given(small_tables())
@settings(max_examples=60, deadline=None)
def test_mutate_preserves_row_count(table):
    out = relational.mutate(table, SummariseCondition("nn", "n", None))
    assert len(out) == len(table)


@given(small_tables())
@settings(max_examples=60, deadline=None)
def test_summarise_row_count_is_group_count(table):
    out = relational.summarise(
        table, SummariseCondition("nn", "n", None), ("c0",))
    assert len(out) == len(set(table.column("c0")))


@given(small_tables(), small_tables())
@settings(max_examples=60, deadline=None)
def test_semi_join_rows_subset(a, b):
    if not set(a.column_names) & set(b.column_names):
        return
    out = relational.semi_join(a, b)
    assert Counter(out.rows) - Counter(a.rows) == Counter()


@given(small_tables())
@settings(max_examples=40, deadline=None)
def test_lax_equality_reflexive_symmetric(table):
    assert tables_equal_lax(table, table)
    permuted = Table(
        Schema_permuted(table),
        tuple(tuple(reversed(row)) for row in table.rows))
    assert tables_equal_lax(table, permuted)
    assert tables_equal_lax(permuted, table)


def Schema_permuted(table):
    from sqlsynth.relational import Schema
    return Schema(tuple(reversed(table.schema.columns)))


@given(small_tables())
@settings(max_examples=60, deadline=None)
def test_output_schema_matches_inference_rule(table):
    env = {"T": table}
    out = apply_line("mutate", ("T", SummariseCondition("zz", "n", None)), env)
    predicted = dsl.line_output_columns(
        dsl.Line("o", "mutate", ("T", SummariseCondition("zz", "n", None))),
        {"T": frozenset(table.column_names)})
    assert frozenset(out.column_names) == predicted
