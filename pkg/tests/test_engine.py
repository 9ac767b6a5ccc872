from __future__ import annotations

from pathlib import Path

import pytest

from sqlsynth.engine import RunConfig, run
from sqlsynth.instance import load_instance
from sqlsynth.relational import tables_equal_strict
from sqlsynth.sqlgen import run_sql

FIG1 = Path(__file__).resolve().parent.parent / "benchmarks" / "fig1"


@pytest.fixture(scope="module")
def fig1():
    return load_instance(FIG1 / "manifest.json")


def check_solution_sql(sol, inst):
    out = run_sql(sol.sql, inst.input_tables)
    assert tables_equal_strict(out, inst.output_table)


def test_sequential_first_solves_fig1(fig1):
    report = run(fig1, RunConfig(n_workers=1, time_limit=30, mode="first"))
    assert report.solved
    sol = report.solutions[0]
    assert "GROUP BY" in sol.sql
    check_solution_sql(sol, fig1)


def test_zero_time_limit_times_out(fig1):
    report = run(fig1, RunConfig(time_limit=0))
    assert report.timed_out and not report.solutions


def test_parallel_first_solves_fig1(fig1):
    report = run(fig1, RunConfig(n_workers=4, time_limit=30, mode="first",
                                 seed=11))
    assert report.solved
    check_solution_sql(report.solutions[0], fig1)


def test_mode_all_collects_distinct_solutions(fig1):
    report = run(fig1, RunConfig(n_workers=1, time_limit=30, mode="all",
                                 max_size=2))
    assert report.exhausted
    programs = [s.program for s in report.solutions]
    assert len(programs) == len(set(programs))
    assert len(programs) >= 2  # count(*) and distinct-student variants
    for sol in report.solutions:
        check_solution_sql(sol, fig1)


def test_deterministic_runs_identical(fig1):
    config = RunConfig(n_workers=4, time_limit=60, mode="all", seed=7,
                       deterministic=True, max_size=2)
    a = run(fig1, config)
    b = run(fig1, config)
    assert [s.sql for s in a.solutions] == [s.sql for s in b.solutions]
    assert [s.elapsed for s in a.solutions] == [s.elapsed for s in b.solutions]
    assert a.programs_evaluated == b.programs_evaluated


def test_deterministic_matches_sequential_solution_set(fig1):
    seq = run(fig1, RunConfig(n_workers=1, time_limit=60, mode="all",
                              max_size=2))
    sim = run(fig1, RunConfig(n_workers=3, time_limit=60, mode="all",
                              seed=3, deterministic=True, max_size=2))
    assert seq.exhausted and sim.exhausted
    assert {s.program for s in seq.solutions} == {s.program
                                                  for s in sim.solutions}


def test_parallel_mode_all_same_set(fig1):
    seq = run(fig1, RunConfig(n_workers=1, time_limit=60, mode="all",
                              max_size=2))
    par = run(fig1, RunConfig(n_workers=4, time_limit=60, mode="all",
                              seed=5, max_size=2))
    assert par.exhausted
    assert {s.program for s in seq.solutions} == {s.program
                                                  for s in par.solutions}
