from __future__ import annotations

from pathlib import Path

import pytest

from sqlsynth import dsl, enumerator, verifier
from sqlsynth.dsl import SummariseCondition
from sqlsynth.enumerator import (EnumerationConfig, UniverseOverflow,
                                 build_argument_space, check_premises,
                                 enumerate_programs)
from sqlsynth.instance import Instance, load_instance
from sqlsynth.relational import ColType, Table, UnknownColumn

FIG1 = Path(__file__).resolve().parent.parent / "benchmarks" / "fig1"


@pytest.fixture(scope="module")
def fig1() -> Instance:
    return load_instance(FIG1 / "manifest.json")


@pytest.fixture(scope="module")
def fig1_space(fig1):
    return build_argument_space(fig1)


def make_instance(tables, output, constants=(), aggregators=(),
                  comparison_columns=()):
    from sqlsynth.relational import expand_aggregators
    return Instance(
        name="test",
        input_tables=dict(tables),
        output_table=output,
        constants=list(constants),
        aggregators=expand_aggregators(aggregators),
        comparison_columns=list(comparison_columns),
        foreign_keys=[],
    )


class TestArgumentSpace:
    def test_fig1_summarise_conditions_include_count_star(self, fig1_space):
        rendered = [a.payload.render()
                    for a in fig1_space.summarise_conditions]
        assert "GradeCount = n()" in rendered

    def test_no_constants_no_filters(self, fig1_space):
        assert fig1_space.filter_conditions == ()

    def test_text_atoms_restricted_to_equality(self, grades, grades_per_course):
        inst = make_instance({"Grades": grades}, grades_per_course,
                             constants=["A"], comparison_columns=["Grade"])
        space = build_argument_space(inst)
        singles = [a.payload for a in space.filter_conditions
                   if len(a.payload.atoms) == 1]
        assert {c.atoms[0].op for c in singles} == {"==", "!="}
        assert len(singles) == 2

    def test_universe_overflow(self, grades, grades_per_course):
        inst = make_instance({"Grades": grades}, grades_per_course)
        with pytest.raises(UniverseOverflow):
            build_argument_space(inst, EnumerationConfig(bitmask_width=2))

    def test_annotations_follow_argument_kind(self, fig1_space):
        universe = fig1_space.universe
        for arg in fig1_space.column_pairs:
            assert arg.ann1 == universe.bit(arg.payload.left_column)
            assert arg.ann2 == universe.bit(arg.payload.right_column)
        for arg in fig1_space.summarise_conditions:
            assert arg.ann2 == universe.bit(arg.payload.new_column)


class TestPremises:
    def test_filter_premise(self):
        arg = enumerator.AnnotatedArgument("c", 0b011)
        assert check_premises("filter", [0b111], arg, None) == 0b111
        assert check_premises("filter", [0b101], arg, None) is None

    def test_left_join_needs_shared(self):
        assert check_premises("left_join", [0b110, 0b001], None) is None
        assert check_premises("left_join", [0b110, 0b010], None) == 0b110

    def test_summarise_collision(self):
        cond = enumerator.AnnotatedArgument("c", 0b001, 0b100)
        cols = enumerator.AnnotatedArgument(("g",), 0b100)
        assert check_premises("summarise", [0b111], cond, cols) is None
        cols_ok = enumerator.AnnotatedArgument(("g",), 0b010)
        assert check_premises("summarise", [0b111], cond, cols_ok) == 0b110


class TestEnumeration:
    def test_fig1_cube_contains_solution(self, fig1, fig1_space):
        programs = list(enumerate_programs(
            fig1, fig1_space, ("natural_join", "summarise")))
        hits = [p for p in programs
                if verifier.satisfies(verifier.execute(p, fig1),
                                      fig1.output_table)]
        assert hits, "no program reproduces the expected output"
        rendered = hits[0].render()
        assert "natural_join(Grades, Courses)" in rendered
        assert "GradeCount = n()" in rendered

    def test_pruned_filter_program_absent(self, grades, courses,
                                          grades_per_course):
        inst = make_instance({"Grades": grades, "Courses": courses},
                             grades_per_course, constants=["A"],
                             comparison_columns=["Grade"])
        space = build_argument_space(inst)
        programs = list(enumerate_programs(inst, space, ("filter",)))
        # Filters over Grade apply to Grades only; Courses lacks the column.
        assert programs
        assert all(p.lines[0].args[0] == "Grades" for p in programs)

    def test_empty_condition_space_empty_stream(self, fig1, fig1_space):
        assert list(enumerate_programs(fig1, fig1_space, ("filter",))) == []

    def test_no_duplicates(self, fig1, fig1_space):
        programs = list(enumerate_programs(fig1, fig1_space, 2))
        assert len(programs) == len(set(programs))

    def test_deterministic_order(self, fig1, fig1_space):
        a = list(enumerate_programs(fig1, fig1_space, 2))
        b = list(enumerate_programs(fig1, fig1_space, 2))
        assert a == b

    def test_intermediate_lines_must_be_used(self, fig1, fig1_space):
        for prog in enumerate_programs(fig1, fig1_space,
                                       ("natural_join", "summarise")):
            used = {t for line in prog.lines for t in line.table_args()}
            for line in prog.lines[:-1]:
                assert line.output in used

    def test_annotation_matches_execution_schema(self, fig1, fig1_space):
        from sqlsynth.relational import EngineError
        universe = fig1_space.universe
        for prog in enumerate_programs(fig1, fig1_space, 2):
            try:
                out = verifier.execute(prog, fig1)
            except EngineError:
                # e.g. union of incompatible tables; no premise rules it out.
                continue
            assert universe.mask(out.column_names) == _final_mask(
                fig1, fig1_space, prog)


def _final_mask(inst, space, prog):
    masks = dict(space.input_masks)
    for line in prog.lines:
        sig = dsl.OPERATIONS[line.op]
        table_masks = [masks[a] for a, k in zip(line.args, sig)
                       if k == dsl.TABLE]
        extra = None
        cols = None
        if line.op == "summarise":
            cond = line.args[1]
            extra = enumerator.AnnotatedArgument(
                cond, space.universe.mask(cond.used_columns()),
                space.universe.mask(cond.generated_columns()))
            cols = enumerator.AnnotatedArgument(
                line.args[2], space.universe.mask(line.args[2]))
        elif line.op == "mutate":
            cond = line.args[1]
            extra = enumerator.AnnotatedArgument(
                cond, space.universe.mask(cond.used_columns()),
                space.universe.mask(cond.generated_columns()))
        elif line.op == "filter":
            cond = line.args[1]
            extra = enumerator.AnnotatedArgument(
                cond, space.universe.mask(cond.columns()))
        elif line.op in ("inner_join", "cross_join"):
            cond = line.args[2]
            extra = enumerator.AnnotatedArgument(
                cond, space.universe.bit(cond.left_column),
                space.universe.bit(cond.right_column))
        elif line.op == "anti_join":
            extra = enumerator.AnnotatedArgument(
                line.args[2], space.universe.mask(line.args[2]))
        elif line.op == "intersect":
            extra = enumerator.AnnotatedArgument(
                line.args[2], space.universe.bit(line.args[2]))
        mask = check_premises(line.op, table_masks, extra, cols)
        assert mask is not None
        masks[line.output] = mask
    return masks[prog.lines[-1].output]


class TestPruningOracle:
    """Pruned enumeration == syntactic enumeration minus UnknownColumn."""

    def run_oracle(self, inst, size):
        space = build_argument_space(inst)
        mini = ("filter", "natural_join", "summarise")
        pruned = set(enumerate_programs(inst, space, size, operations=mini))
        brute = set(enumerate_programs(inst, space, size, operations=mini,
                                       prune=False))
        survivors = set()
        for prog in brute:
            try:
                verifier.execute(prog, inst)
            except UnknownColumn:
                continue
            except Exception:
                pass
            survivors.add(prog)
        assert pruned == survivors

    def test_fig1_size2(self, fig1):
        self.run_oracle(fig1, 2)

    def test_disjoint_tables(self, grades, grades_per_course):
        extra = Table.from_rows([("Other", ColType.INT)], [(1,)])
        inst = make_instance({"Grades": grades, "Extra": extra},
                             grades_per_course, constants=["A"],
                             comparison_columns=["Grade"],
                             aggregators=["count"])
        self.run_oracle(inst, 2)
