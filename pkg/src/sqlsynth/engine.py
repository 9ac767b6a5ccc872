"""Search coordination: sequential, simulated-deterministic, and
multiprocess backends.

The coordinator owns the bigram model and the cube trie.  Workers receive
cube assignments, enumerate and evaluate the programs inside them, stream
score batches back (one decay per batch), and report solutions or
exhaustion.  Strict message passing; the only shared state is the immutable
instance and argument space.

The deterministic backend steps simulated workers round-robin in a single
process, applying score updates batched and in worker order, so a fixed seed
reproduces runs bit for bit.  Solution timestamps are then logical (number
of programs evaluated), not wall-clock.
"""

from __future__ import annotations

import logging
import multiprocessing as mp
import queue as queue_mod
import random
import time
from dataclasses import dataclass, field
from typing import Iterator, Optional

from . import sqlgen, verifier
from .cubes import BigramModel, Cube, CubeTrie, spaces_for, split_workers
from .dsl import OPERATION_ORDER, Program
from .enumerator import (ArgumentSpace, EnumerationConfig,
                         build_argument_space, enumerate_programs)
from .instance import Instance
from .relational import EngineError
from .verifier import Projection

logger = logging.getLogger(__name__)

SCORE_BATCH_SIZE = 64


@dataclass
class RunConfig:
    n_workers: int = 1
    time_limit: float = 60.0
    mode: str = "first"  # first | all
    seed: int = 0
    ratio: tuple[int, int] = (1, 2)
    deterministic: bool = False
    max_size: int = 4
    max_programs: Optional[int] = None
    operations: Optional[tuple[str, ...]] = None
    enum: EnumerationConfig = field(default_factory=EnumerationConfig)


@dataclass
class Solution:
    program: Program
    projection: Projection
    sql: str
    elapsed: float
    order: int


@dataclass
class RunReport:
    solutions: list[Solution]
    mode: str
    n_workers: int
    seed: int
    deterministic: bool
    elapsed: float
    programs_evaluated: int
    cubes_dispatched: int
    timed_out: bool
    exhausted: bool

    @property
    def solved(self) -> bool:
        return bool(self.solutions)


def evaluate_program(prog: Program, inst: Instance
                     ) -> tuple[float, Optional[Projection]]:
    """Score one candidate; engine errors score 0 and never satisfy."""
    try:
        output = verifier.execute(prog, inst)
    except EngineError:
        return 0.0, None
    s = verifier.score(output, inst.output_table)
    if s < 1.0:
        return s, None
    return s, verifier.satisfies(output, inst.output_table)


def _make_solution(prog: Program, proj: Projection, inst: Instance,
                   elapsed: float, order: int) -> Solution:
    sql = sqlgen.to_sql(prog, proj.pairs, inst.input_tables)
    return Solution(prog, proj, sql, elapsed, order)


# ---------------------------------------------------------------------------
# Sequential backend
# ---------------------------------------------------------------------------

def _run_sequential(inst: Instance, space: ArgumentSpace,
                    config: RunConfig) -> RunReport:
    start = time.monotonic()
    deadline = start + config.time_limit
    solutions: list[Solution] = []
    seen: set[Program] = set()
    evaluated = 0
    timed_out = False
    exhausted = True

    stream = enumerate_programs(inst, space, config.max_size,
                                operations=config.operations)
    for prog in stream:
        if time.monotonic() > deadline or (
                config.max_programs and evaluated >= config.max_programs):
            timed_out = time.monotonic() > deadline
            exhausted = False
            break
        evaluated += 1
        _, proj = evaluate_program(prog, inst)
        if proj is not None and prog not in seen:
            seen.add(prog)
            elapsed = (evaluated if config.deterministic
                       else time.monotonic() - start)
            solutions.append(
                _make_solution(prog, proj, inst, elapsed, len(solutions)))
            if config.mode == "first":
                exhausted = False
                break
    return RunReport(
        solutions=solutions, mode=config.mode, n_workers=1, seed=config.seed,
        deterministic=config.deterministic,
        elapsed=time.monotonic() - start, programs_evaluated=evaluated,
        cubes_dispatched=0,
        timed_out=timed_out and not solutions, exhausted=exhausted)


# ---------------------------------------------------------------------------
# Cube scheduling shared by the simulated and multiprocess backends
# ---------------------------------------------------------------------------

class _CubeScheduler:
    """Hands out fresh cubes per worker tag, advancing sizes as levels
    exhaust; owns the model, trie, and rng."""

    def __init__(self, config: RunConfig):
        self.model = BigramModel()
        self.trie = CubeTrie()
        self.rng = random.Random(config.seed)
        self.max_size = config.max_size
        self.spaces = spaces_for(config.operations)
        self.sizes: dict[str, int] = {}
        self.requeued: dict[str, list[tuple[str, ...]]] = {}
        self.dispatched = 0

    def current_level(self) -> int:
        return max(self.sizes.values(), default=1)

    def next_cube(self, tag: str) -> Optional[Cube]:
        pending = self.requeued.get(tag)
        if pending:
            self.dispatched += 1
            return Cube(pending.pop(0))
        space = self.spaces[tag]
        if tag == "random":
            level = min(self.max_size, self.current_level() + 1)
            sizes = list(range(1, level + 1))
            self.rng.shuffle(sizes)
            for size in sizes:
                cube = self.trie.sample(space, size, None, self.rng)
                if cube is not None:
                    self.dispatched += 1
                    return cube
            return None
        size = self.sizes.get(tag, 1)
        while size <= self.max_size:
            cube = self.trie.sample(space, size, self.model, self.rng)
            if cube is not None:
                self.sizes[tag] = size
                self.dispatched += 1
                return cube
            size += 1
            self.sizes[tag] = size
        return None

    def requeue(self, tag: str, ops: tuple[str, ...]) -> None:
        self.requeued.setdefault(tag, []).append(ops)

    def apply_scores(self, batch: list[tuple[tuple[str, ...], float]]) -> None:
        self.model.decay()
        for ops, s in batch:
            if s:
                self.model.update(ops, s)


# ---------------------------------------------------------------------------
# Simulated deterministic backend
# ---------------------------------------------------------------------------

class _SimWorker:
    def __init__(self, wid: int, tag: str):
        self.wid = wid
        self.tag = tag
        self.stream: Optional[Iterator[Program]] = None
        self.idle = False


def _run_simulated(inst: Instance, space: ArgumentSpace,
                   config: RunConfig) -> RunReport:
    start = time.monotonic()
    deadline = start + config.time_limit
    sched = _CubeScheduler(config)
    tags = split_workers(config.n_workers, config.ratio)
    workers = [_SimWorker(i, tag) for i, tag in enumerate(tags)]
    solutions: list[Solution] = []
    seen: set[Program] = set()
    evaluated = 0
    timed_out = False

    while True:
        if all(w.idle for w in workers):
            break
        if time.monotonic() > deadline or (
                config.max_programs and evaluated >= config.max_programs):
            timed_out = time.monotonic() > deadline
            break
        sweep_batches: list[list] = []
        for w in workers:
            if w.idle:
                continue
            if w.stream is None:
                cube = sched.next_cube(w.tag)
                if cube is None:
                    w.idle = True
                    continue
                w.stream = enumerate_programs(inst, space, cube.ops)
            batch = []
            for prog in w.stream:
                evaluated += 1
                s, proj = evaluate_program(prog, inst)
                batch.append((prog.op_sequence(), s))
                if proj is not None and prog not in seen:
                    seen.add(prog)
                    solutions.append(_make_solution(
                        prog, proj, inst, evaluated, len(solutions)))
                    if config.mode == "first":
                        return RunReport(
                            solutions=solutions, mode=config.mode,
                            n_workers=config.n_workers, seed=config.seed,
                            deterministic=True,
                            elapsed=time.monotonic() - start,
                            programs_evaluated=evaluated,
                            cubes_dispatched=sched.dispatched,
                            timed_out=False, exhausted=False)
                if len(batch) >= SCORE_BATCH_SIZE:
                    break
            else:
                w.stream = None  # cube exhausted
            if batch:
                sweep_batches.append(batch)
        for batch in sweep_batches:
            sched.apply_scores(batch)

    return RunReport(
        solutions=solutions, mode=config.mode, n_workers=config.n_workers,
        seed=config.seed, deterministic=True,
        elapsed=time.monotonic() - start, programs_evaluated=evaluated,
        cubes_dispatched=sched.dispatched,
        timed_out=timed_out and not solutions,
        exhausted=all(w.idle for w in workers))


# ---------------------------------------------------------------------------
# Multiprocess backend
# ---------------------------------------------------------------------------

def _worker_main(wid: int, inst: Instance, enum_config: EnumerationConfig,
                 deadline: float, task_q, result_q) -> None:
    space = build_argument_space(inst, enum_config)
    result_q.put(("ready", wid))
    while True:
        try:
            msg = task_q.get(timeout=1.0)
        except queue_mod.Empty:
            if time.monotonic() > deadline + 5.0:
                return
            continue
        if msg[0] == "stop":
            return
        ops = msg[1]
        batch: list = []
        hit_deadline = False
        for prog in enumerate_programs(inst, space, ops):
            if time.monotonic() > deadline:
                hit_deadline = True
                break
            s, proj = evaluate_program(prog, inst)
            batch.append((prog.op_sequence(), s))
            if proj is not None:
                result_q.put(("solution", wid, prog, proj, time.monotonic()))
            if len(batch) >= SCORE_BATCH_SIZE:
                result_q.put(("scores", wid, batch))
                batch = []
        if batch:
            result_q.put(("scores", wid, batch))
        if hit_deadline:
            result_q.put(("deadline", wid))
        else:
            result_q.put(("exhausted", wid, ops))


def _run_parallel(inst: Instance, space: ArgumentSpace,
                  config: RunConfig) -> RunReport:
    start = time.monotonic()
    deadline = start + config.time_limit
    sched = _CubeScheduler(config)
    tags = split_workers(config.n_workers, config.ratio)

    ctx = mp.get_context("fork")
    result_q = ctx.Queue()
    task_qs = [ctx.Queue() for _ in tags]
    procs = []
    for wid, _ in enumerate(tags):
        p = ctx.Process(
            target=_worker_main,
            args=(wid, inst, config.enum, deadline, task_qs[wid], result_q),
            daemon=True)
        p.start()
        procs.append(p)

    outstanding: dict[int, Optional[tuple[str, ...]]] = {}
    idle: set[int] = set()
    solutions: list[Solution] = []
    seen: set[Program] = set()
    timed_out = False
    stop_sent = False

    def assign(wid: int) -> None:
        cube = sched.next_cube(tags[wid])
        if cube is None:
            idle.add(wid)
            outstanding.pop(wid, None)
            task_qs[wid].put(("stop",))
        else:
            outstanding[wid] = cube.ops
            task_qs[wid].put(("cube", cube.ops))

    def stop_all() -> None:
        nonlocal stop_sent
        if not stop_sent:
            for q in task_qs:
                q.put(("stop",))
            stop_sent = True

    try:
        while True:
            if len(idle) == len(tags):
                break
            now = time.monotonic()
            if now > deadline:
                timed_out = not solutions
                break
            try:
                msg = result_q.get(timeout=min(0.2, max(0.01, deadline - now)))
            except queue_mod.Empty:
                for wid, p in enumerate(procs):
                    if wid not in idle and not p.is_alive():
                        logger.warning("worker %d died; requeueing cube", wid)
                        ops = outstanding.pop(wid, None)
                        if ops:
                            sched.requeue(tags[wid], ops)
                        idle.add(wid)
                continue
            kind = msg[0]
            if kind == "ready":
                assign(msg[1])
            elif kind == "scores":
                sched.apply_scores(msg[2])
            elif kind == "solution":
                _, wid, prog, proj, t = msg
                if prog not in seen:
                    seen.add(prog)
                    solutions.append(_make_solution(
                        prog, proj, inst, t - start, len(solutions)))
                if config.mode == "first":
                    stop_all()
                    break
            elif kind == "exhausted":
                outstanding.pop(msg[1], None)
                if not stop_sent:
                    assign(msg[1])
            elif kind == "deadline":
                idle.add(msg[1])
                outstanding.pop(msg[1], None)
    finally:
        stop_all()
        for p in procs:
            p.join(timeout=2.0)
        for p in procs:
            if p.is_alive():
                p.terminate()
        result_q.close()

    return RunReport(
        solutions=solutions, mode=config.mode, n_workers=config.n_workers,
        seed=config.seed, deterministic=False,
        elapsed=time.monotonic() - start, programs_evaluated=0,
        cubes_dispatched=sched.dispatched, timed_out=timed_out,
        exhausted=len(idle) == len(tags) and not timed_out)


def run(inst: Instance, config: RunConfig = RunConfig()) -> RunReport:
    """Synthesize programs reproducing the instance's expected output.

    mode="first" returns at most one solution; mode="all" collects every
    distinct solution found within the time limit, in discovery order.
    """
    space = build_argument_space(inst, config.enum)
    if config.time_limit <= 0:
        return RunReport(
            solutions=[], mode=config.mode, n_workers=config.n_workers,
            seed=config.seed, deterministic=config.deterministic, elapsed=0.0,
            programs_evaluated=0, cubes_dispatched=0, timed_out=True,
            exhausted=False)
    if config.n_workers <= 1:
        return _run_sequential(inst, space, config)
    if config.deterministic:
        return _run_simulated(inst, space, config)
    return _run_parallel(inst, space, config)
