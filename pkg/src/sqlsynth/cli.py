"""Command-line interface.

Subcommands: synth (search for queries), disambiguate (narrow candidates via
yes/no questions), bench (run a manifest directory and grade results against
ground truths), serve (HTTP session service).

Exit codes: 0 success, 1 invalid input, 2 timeout without a solution,
3 oracle abort.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import fuzzy_eval
from .disambiguator import (Candidate, GroundTruthOracle, OracleAbort,
                            ScriptedOracle, disambiguate)
from .engine import RunConfig, RunReport, run
from .enumerator import EnumerationConfig
from .instance import Instance, InstanceError, load_instance
from .relational import Table

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_TIMEOUT = 2
EXIT_ABORT = 3


def format_table(table: Table, max_rows: int = 50) -> str:
    header = list(table.column_names)
    rows = [["" if v is None else str(v) for v in row]
            for row in table.rows[:max_rows]]
    widths = [len(h) for h in header]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = [" | ".join(h.ljust(w) for h, w in zip(header, widths)),
             "-+-".join("-" * w for w in widths)]
    lines += [" | ".join(c.ljust(w) for c, w in zip(row, widths))
              for row in rows]
    if len(table.rows) > max_rows:
        lines.append(f"... ({len(table.rows) - max_rows} more rows)")
    return "\n".join(lines)


def _parse_ratio(text: str) -> tuple[int, int]:
    try:
        f, b = text.split(":")
        return int(f), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError("ratio must look like 1:2")


def _run_config(args) -> RunConfig:
    return RunConfig(
        n_workers=args.workers,
        time_limit=args.timeout,
        mode=getattr(args, "mode", "all"),
        seed=args.seed,
        ratio=getattr(args, "ratio", (1, 2)),
        deterministic=getattr(args, "deterministic", False),
        max_size=args.max_size,
        enum=EnumerationConfig(),
    )


def solutions_payload(report: RunReport) -> list[dict]:
    return [
        {
            "order": sol.order,
            "sql": sol.sql,
            "size": sol.program.size,
            "program": sol.program.render(),
            "elapsed": sol.elapsed,
        }
        for sol in report.solutions
    ]


def _write_report(path: str | None, payload: dict) -> None:
    if path:
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True),
                              encoding="utf-8")


def cmd_synth(args) -> int:
    try:
        inst = load_instance(args.manifest)
    except InstanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    report = run(inst, _run_config(args))
    payload = {
        "instance": inst.name,
        "mode": report.mode,
        "workers": report.n_workers,
        "seed": report.seed,
        "deterministic": report.deterministic,
        "elapsed": report.elapsed,
        "timed_out": report.timed_out,
        "exhausted": report.exhausted,
        "solutions": solutions_payload(report),
    }
    _write_report(args.report, payload)
    if not report.solutions:
        print("no solution found", file=sys.stderr)
        return EXIT_TIMEOUT
    if report.mode == "first":
        print(report.solutions[0].sql)
    else:
        for sol in report.solutions:
            stamp = (f"{sol.elapsed}" if report.deterministic
                     else f"{sol.elapsed:.3f}s")
            print(f"[{sol.order}] ({stamp}) {sol.sql}")
    return EXIT_OK


class InteractiveOracle:
    """Prints each proposed example and reads y/n/q from stdin."""

    def __init__(self, stream=None):
        self.stream = stream or sys.stdin

    def answer(self, tables, output) -> bool:
        print("\nIf the database were:")
        for name, table in tables.items():
            print(f"\n{name}:")
            print(format_table(table))
        print("\nwould this be the correct result?")
        print(format_table(output))
        while True:
            print("[y/n/q] ", end="", flush=True)
            line = self.stream.readline()
            if not line:
                raise OracleAbort("input closed")
            line = line.strip().lower()
            if line in ("y", "yes"):
                return True
            if line in ("n", "no"):
                return False
            if line in ("q", "quit"):
                raise OracleAbort("user quit")


def _candidates_from_report(report: RunReport) -> list[Candidate]:
    return [Candidate(sol.program, sol.projection, sol.sql, sol.order)
            for sol in report.solutions]


def _oracle_from_args(args, inst: Instance, manifest: dict):
    if args.answers:
        answers = json.loads(Path(args.answers).read_text())
        return ScriptedOracle([bool(a) for a in answers])
    if args.oracle == "interactive":
        return InteractiveOracle()
    if args.oracle.startswith("groundtruth"):
        _, _, value = args.oracle.partition("=")
        truth = value or manifest.get("ground_truth")
        if not truth:
            raise InstanceError("no ground truth query available")
        if Path(truth).exists():
            truth = Path(truth).read_text(encoding="utf-8").strip()
        return GroundTruthOracle(truth)
    raise InstanceError(f"unknown oracle {args.oracle!r}")


def cmd_disambiguate(args) -> int:
    try:
        inst = load_instance(args.manifest)
        manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        oracle = _oracle_from_args(args, inst, manifest)
    except (InstanceError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    report = run(inst, _run_config(args))
    if not report.solutions:
        print("no candidate queries found", file=sys.stderr)
        return EXIT_TIMEOUT
    candidates = _candidates_from_report(report)
    print(f"{len(candidates)} candidate queries; asking questions...")
    result = disambiguate(candidates, inst, oracle, rounds=args.rounds,
                          seed=args.seed)
    payload = {
        "instance": inst.name,
        "candidates": len(candidates),
        "questions": result.questions_asked,
        "aborted": result.aborted,
        "sql": result.chosen.sql,
        "log": [
            {"answer": e.answer, "before": e.before, "after": e.after}
            for e in result.log
        ],
    }
    _write_report(args.report, payload)
    print(f"\nfinal query after {result.questions_asked} question(s):")
    print(result.chosen.sql)
    if result.aborted:
        print("(disambiguation aborted; returned earliest candidate)",
              file=sys.stderr)
        return EXIT_ABORT
    return EXIT_OK


def cmd_bench(args) -> int:
    root = Path(args.directory)
    manifests = sorted(root.glob("*/manifest.json"))
    if not manifests:
        print(f"error: no manifests under {root}", file=sys.stderr)
        return EXIT_INVALID
    tallies = {"solved": 0, "possibly_correct": 0, "incorrect_by_fuzzing": 0,
               "inconclusive": 0, "execution_error": 0}
    records = []
    for manifest_path in manifests:
        inst = load_instance(manifest_path)
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        started = time.monotonic()
        report = run(inst, _run_config(args))
        record = {
            "instance": inst.name,
            "solved": report.solved,
            "solutions": len(report.solutions),
            "elapsed": round(time.monotonic() - started, 3),
        }
        if report.solved:
            tallies["solved"] += 1
            truth = manifest.get("ground_truth")
            if truth:
                verdict = fuzzy_eval.fuzzy_check(
                    report.solutions[0].sql, truth, inst.input_tables,
                    inst.foreign_keys, rounds=args.rounds, seed=args.seed)
                record["verdict"] = verdict.kind
                record["verdict_round"] = verdict.round_index
                tallies[verdict.kind] += 1
        records.append(record)
        print(json.dumps(record, sort_keys=True))
    summary = {"instances": len(manifests), **tallies}
    print("\nSolved:              ", tallies["solved"])
    print("Possibly Correct:    ", tallies["possibly_correct"])
    print("Incorrect by Fuzzing:", tallies["incorrect_by_fuzzing"])
    print("Inconclusive:        ", tallies["inconclusive"])
    print("Execution Error:     ", tallies["execution_error"])
    _write_report(args.report, {"summary": summary, "instances": records})
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app
    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sqlsynth",
        description="Synthesize SQL queries from input-output examples")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_search_args(p, default_mode):
        p.add_argument("manifest")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--timeout", type=float, default=60.0)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--max-size", type=int, default=3, dest="max_size")
        if default_mode:
            p.add_argument("--mode", choices=("first", "all"),
                           default=default_mode)
            p.add_argument("--ratio", type=_parse_ratio, default=(1, 2))
            p.add_argument("--deterministic", action="store_true")
        p.add_argument("--report")

    p_synth = sub.add_parser("synth", help="search for matching queries")
    add_search_args(p_synth, "first")
    p_synth.set_defaults(func=cmd_synth)

    p_dis = sub.add_parser("disambiguate",
                           help="synthesize all candidates, then ask questions")
    add_search_args(p_dis, None)
    p_dis.add_argument("--rounds", type=int, default=16)
    p_dis.add_argument("--oracle", default="interactive",
                       help="interactive | groundtruth[=SQL or file]")
    p_dis.add_argument("--answers",
                       help="JSON file with scripted yes/no answers")
    p_dis.set_defaults(func=cmd_disambiguate, mode="all", ratio=(1, 2),
                       deterministic=False)

    p_bench = sub.add_parser("bench", help="run a directory of instances")
    p_bench.add_argument("directory")
    p_bench.add_argument("--workers", type=int, default=1)
    p_bench.add_argument("--timeout", type=float, default=60.0)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--max-size", type=int, default=3, dest="max_size")
    p_bench.add_argument("--rounds", type=int, default=16)
    p_bench.add_argument("--report")
    p_bench.set_defaults(func=cmd_bench, mode="all", deterministic=False,
                         ratio=(1, 2))

    p_serve = sub.add_parser("serve", help="start the HTTP session service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
