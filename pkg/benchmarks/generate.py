"""Regenerate the mini benchmark suite.

Each instance directory gets its input CSVs, a manifest, and an expected.csv
produced by running the ground-truth SQL on the inputs, so the examples are
consistent with the ground truths by construction.

Usage: python3 benchmarks/generate.py
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import sys

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from sqlsynth.instance import load_table  # noqa: E402
from sqlsynth.sqlgen import run_sql  # noqa: E402

ROOT = Path(__file__).resolve().parent / "mini"

EMPLOYEES = [
    ("eid", "name", "dept", "salary"),
    (1, "ann", "sales", 1200),
    (2, "bob", "ops", 1500),
    (3, "cat", "sales", 1800),
    (4, "dan", "eng", 2100),
    (5, "eve", "ops", 1100),
    (6, "fay", "eng", 1700),
    (7, "gus", "sales", 900),
]

EMPLOYEES_HR = EMPLOYEES + [(8, "hal", "hr", 1000)]

DEPTS = [
    ("dept", "head"),
    ("sales", "ann"),
    ("ops", "bob"),
    ("eng", "dan"),
]

SALES = [
    ("eid", "amount", "day"),
    (1, 100, "2021-01-02"),
    (1, 250, "2021-01-05"),
    (3, 300, "2021-01-03"),
    (4, 150, "2021-01-04"),
    (3, 120, "2021-01-08"),
    (6, 80, "2021-01-09"),
]

PARTTIME = [
    ("pid", "pname"),
    (11, "ned"),
    (12, "opal"),
]

FULLTIME = [
    ("pid", "pname"),
    (13, "pam"),
    (11, "ned"),
]

MANAGERS = [
    ("mid", "mname"),
    (1, "ann"),
    (4, "dan"),
]

INSTANCES = [
    {
        "name": "i01_filter_text",
        "tables": {"employees": EMPLOYEES},
        "ground_truth": "SELECT * FROM employees WHERE dept = 'sales'",
        "constants": ["sales", "hr"],
        "comparison_columns": ["dept", "name"],
    },
    {
        "name": "i02_band_count",
        "tables": {"employees": EMPLOYEES},
        "ground_truth": ("SELECT dept, count(*) AS n_kept FROM employees "
                         "WHERE salary >= 1100 AND salary < 1800 "
                         "GROUP BY dept"),
        "constants": [1100, 1800],
        "comparison_columns": ["salary"],
        "aggregators": ["count"],
    },
    {
        "name": "i03_filter_and",
        "tables": {"employees": EMPLOYEES},
        "ground_truth": ("SELECT * FROM employees "
                         "WHERE salary >= 1100 AND dept = 'ops'"),
        "constants": [1100, "ops"],
        "comparison_columns": ["salary", "dept"],
    },
    {
        "name": "i04_natural_join",
        "tables": {"employees": EMPLOYEES, "depts": DEPTS},
        "ground_truth": "SELECT * FROM employees NATURAL JOIN depts",
    },
    {
        "name": "i05_count_by_dept",
        "tables": {"employees": EMPLOYEES},
        "ground_truth": ("SELECT dept, count(*) AS n_emp FROM employees "
                         "GROUP BY dept"),
        "aggregators": ["count"],
    },
    {
        "name": "i06_sum_filtered",
        "tables": {"employees": EMPLOYEES},
        "ground_truth": ("SELECT dept, sum(salary) AS total FROM employees "
                         "WHERE salary > 900 GROUP BY dept"),
        "constants": [900, 2000],
        "comparison_columns": ["salary"],
        "aggregators": ["sum"],
    },
    {
        "name": "i07_avg_filtered",
        "tables": {"employees": EMPLOYEES},
        "ground_truth": ("SELECT dept, avg(salary) AS avg_salary "
                         "FROM employees WHERE salary < 2000 GROUP BY dept"),
        "constants": [2000, 1000],
        "comparison_columns": ["salary"],
        "aggregators": ["avg"],
    },
    {
        "name": "i08_max_overall",
        "tables": {"employees": EMPLOYEES},
        "ground_truth": "SELECT max(salary) AS top_salary FROM employees",
        "aggregators": ["max"],
    },
    {
        "name": "i09_distinct_filtered",
        "tables": {"employees": EMPLOYEES},
        "ground_truth": ("SELECT count(DISTINCT dept) AS n_depts "
                         "FROM employees WHERE salary >= 1100"),
        "constants": [1100, 1300],
        "comparison_columns": ["salary"],
        "aggregators": ["count"],
    },
    {
        "name": "i10_dept_totals_with_head",
        "tables": {"employees": EMPLOYEES, "depts": DEPTS},
        "ground_truth": ("SELECT dept, total, head FROM (SELECT dept, "
                         "sum(salary) AS total FROM employees GROUP BY dept) "
                         "NATURAL JOIN depts"),
        "constants": [1200],
        "comparison_columns": ["salary"],
        "aggregators": ["sum"],
    },
    {
        "name": "i11_left_join",
        "tables": {"employees": EMPLOYEES_HR, "depts": DEPTS},
        "ground_truth": "SELECT * FROM employees NATURAL LEFT JOIN depts",
    },
    {
        "name": "i12_no_sales_count",
        "tables": {"employees": EMPLOYEES, "sales": SALES},
        "ground_truth": ("SELECT dept, count(*) AS n_emp FROM employees "
                         "WHERE NOT EXISTS (SELECT 1 FROM sales "
                         "WHERE sales.eid = employees.eid) GROUP BY dept"),
        "aggregators": ["count"],
    },
    {
        "name": "i13_with_sales_count",
        "tables": {"employees": EMPLOYEES, "sales": SALES},
        "ground_truth": ("SELECT dept, count(*) AS n_emp FROM employees "
                         "WHERE EXISTS (SELECT 1 FROM sales "
                         "WHERE sales.eid = employees.eid) GROUP BY dept"),
        "aggregators": ["count"],
    },
    {
        "name": "i14_union_with_all",
        "tables": {"employees": EMPLOYEES},
        "ground_truth": ("SELECT * FROM employees WHERE dept = 'sales' "
                         "UNION ALL SELECT * FROM employees"),
        "constants": ["sales", "ops", 1000],
        "comparison_columns": ["dept", "salary"],
    },
    {
        "name": "i15_intersect_filtered",
        "tables": {"employees": EMPLOYEES, "sales": SALES},
        "ground_truth": ("SELECT eid FROM employees WHERE salary >= 1100 "
                         "INTERSECT SELECT eid FROM sales"),
        "constants": [1100, 500],
        "comparison_columns": ["salary"],
    },
    {
        "name": "i16_mutate_max",
        "tables": {"employees": EMPLOYEES},
        "ground_truth": ("SELECT *, (SELECT max(salary) FROM employees) "
                         "AS top FROM employees"),
        "aggregators": ["max"],
    },
    {
        "name": "i17_running_total",
        "tables": {"sales": SALES},
        "ground_truth": ("SELECT *, sum(amount) OVER (ROWS BETWEEN UNBOUNDED "
                         "PRECEDING AND CURRENT ROW) AS running FROM sales"),
        "aggregators": ["cumsum"],
    },
    {
        "name": "i18_top_dept_count",
        "tables": {"employees": EMPLOYEES, "depts": DEPTS},
        "ground_truth": ("SELECT head, count(*) AS n FROM employees "
                         "NATURAL JOIN depts WHERE salary >= 1500 "
                         "GROUP BY head"),
        "constants": [1500],
        "comparison_columns": ["salary"],
        "aggregators": ["count"],
    },
    {
        "name": "i19_join_sum",
        "tables": {"employees": EMPLOYEES, "sales": SALES},
        "ground_truth": ("SELECT name, sum(amount) AS total FROM employees "
                         "NATURAL JOIN sales GROUP BY name"),
        "aggregators": ["sum"],
        "foreign_keys": [{"from": "sales.eid", "to": "employees.eid"}],
    },
    {
        "name": "i20_inner_join_sum",
        "tables": {"employees": EMPLOYEES, "managers": MANAGERS},
        "ground_truth": ("SELECT mname, sum(salary) AS total FROM employees "
                         "JOIN managers ON eid = mid GROUP BY mname"),
        "constants": [1200],
        "comparison_columns": ["salary"],
        "aggregators": ["sum"],
    },
]


def write_csv(path: Path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for row in rows:
            writer.writerow(["" if v is None else v for v in row])


def main() -> None:
    ROOT.mkdir(parents=True, exist_ok=True)
    for spec in INSTANCES:
        directory = ROOT / spec["name"]
        directory.mkdir(exist_ok=True)
        for tname, rows in spec["tables"].items():
            write_csv(directory / f"{tname}.csv", rows)
        loaded = {tname: load_table(directory / f"{tname}.csv")
                  for tname in spec["tables"]}
        result = run_sql(spec["ground_truth"], loaded)
        write_csv(directory / "expected.csv",
                  [result.column_names, *result.rows])
        manifest = {
            "name": spec["name"],
            "inputs": [{"name": tname, "path": f"{tname}.csv"}
                       for tname in spec["tables"]],
            "output": "expected.csv",
            "constants": spec.get("constants", []),
            "aggregators": spec.get("aggregators", []),
            "comparison_columns": spec.get("comparison_columns", []),
            "foreign_keys": spec.get("foreign_keys", []),
            "ground_truth": spec["ground_truth"],
        }
        (directory / "manifest.json").write_text(
            json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
        print(f"wrote {spec['name']}: {len(result)} expected rows")


if __name__ == "__main__":
    main()
