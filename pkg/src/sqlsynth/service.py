"""HTTP session service for interactive disambiguation.

Each session runs synthesis followed by disambiguation in a background
thread; the thread parks whenever a question is pending and resumes when the
client posts an answer.  State lives in memory, keyed by session id; clients
are stateless and poll GET /sessions/{id}.

State machine: synthesizing -> awaiting_answer -> ... -> finished, with
aborted reachable from any live state via POST /abort.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field
from typing import Mapping, Optional

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .disambiguator import (Candidate, DisambiguationResult, OracleAbort,
                            disambiguate)
from .engine import RunConfig, run
from .instance import Instance, InstanceError, instance_from_dict, load_instance
from .relational import Table


def table_json(table: Table) -> dict:
    return {"columns": list(table.column_names),
            "rows": [list(row) for row in table.rows]}


class ChannelOracle:
    """Bridges the blocking oracle protocol to request/response turns."""

    def __init__(self):
        self._condition = threading.Condition()
        self.pending: Optional[tuple] = None  # (tables, output)
        self._answer: Optional[bool] = None
        self._aborted = False

    def answer(self, tables, output) -> bool:
        with self._condition:
            self.pending = (tables, output)
            self._answer = None
            self._condition.notify_all()
            while self._answer is None and not self._aborted:
                self._condition.wait(timeout=0.5)
            self.pending = None
            if self._aborted:
                raise OracleAbort("session aborted")
            return self._answer

    def put_answer(self, value: bool) -> None:
        with self._condition:
            self._answer = value
            self._condition.notify_all()

    def abort(self) -> None:
        with self._condition:
            self._aborted = True
            self._condition.notify_all()


@dataclass
class Session:
    id: str
    instance: Instance
    options: dict
    oracle: ChannelOracle = field(default_factory=ChannelOracle)
    status: str = "synthesizing"
    error: Optional[str] = None
    candidates: int = 0
    questions_asked: int = 0
    remaining: int = 0
    result: Optional[DisambiguationResult] = None
    thread: Optional[threading.Thread] = None
    lock: threading.Lock = field(default_factory=threading.Lock)

    def view(self) -> dict:
        with self.lock:
            payload = {
                "id": self.id,
                "status": self.status,
                "progress": {
                    "candidates": self.candidates,
                    "remaining": self.remaining,
                    "questions_asked": self.questions_asked,
                },
                "question": None,
                "result": None,
                "error": self.error,
            }
            pending = self.oracle.pending
            if self.status == "awaiting_answer" and pending is not None:
                tables, output = pending
                payload["question"] = {
                    "inputs": {name: table_json(t)
                               for name, t in tables.items()},
                    "output": table_json(output),
                }
            if self.result is not None:
                payload["result"] = {
                    "sql": self.result.chosen.sql,
                    "question_count": self.result.questions_asked,
                    "aborted": self.result.aborted,
                    "log": [
                        {"answer": e.answer, "before": e.before,
                         "after": e.after}
                        for e in self.result.log
                    ],
                }
            return payload


class _SessionOracle:
    """Wraps ChannelOracle to keep session counters in sync."""

    def __init__(self, session: Session):
        self.session = session

    def answer(self, tables, output) -> bool:
        session = self.session
        with session.lock:
            session.status = "awaiting_answer"
        try:
            value = session.oracle.answer(tables, output)
        finally:
            with session.lock:
                if session.status == "awaiting_answer":
                    session.status = "working"
        with session.lock:
            session.questions_asked += 1
        return value


def _session_worker(session: Session) -> None:
    options = session.options
    try:
        from .enumerator import EnumerationConfig
        operations = options.get("operations")
        report = run(session.instance, RunConfig(
            n_workers=int(options.get("workers", 1)),
            time_limit=float(options.get("timeout", 20.0)),
            mode="all",
            seed=int(options.get("seed", 0)),
            max_size=int(options.get("max_size", 2)),
            deterministic=bool(options.get("deterministic", False)),
            operations=tuple(operations) if operations else None,
            enum=EnumerationConfig(
                max_filter_atoms=int(options.get("max_filter_atoms", 2))),
        ))
        if not report.solutions:
            with session.lock:
                session.status = "failed"
                session.error = "no candidate queries found"
            return
        candidates = [Candidate(s.program, s.projection, s.sql, s.order)
                      for s in report.solutions]
        with session.lock:
            session.candidates = len(candidates)
            session.remaining = len(candidates)
            session.status = "working"
        result = disambiguate(
            candidates, session.instance, _SessionOracle(session),
            rounds=int(options.get("rounds", 16)),
            seed=int(options.get("seed", 0)))
        with session.lock:
            session.result = result
            session.remaining = len(result.final_set)
            session.status = "aborted" if result.aborted else "finished"
    except Exception as exc:  # surfaced to clients via the state view
        with session.lock:
            session.status = "failed"
            session.error = str(exc)


class CreateSessionRequest(BaseModel):
    manifest: Optional[str] = None
    instance: Optional[dict] = None
    options: dict = {}


class AnswerRequest(BaseModel):
    answer: str | bool


def create_app() -> FastAPI:
    app = FastAPI(title="sqlsynth sessions")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
        allow_headers=["*"])
    sessions: dict[str, Session] = {}

    def get_session(session_id: str) -> Session:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return session

    @app.post("/sessions")
    def create_session(request: CreateSessionRequest):
        try:
            if request.instance is not None:
                inst = instance_from_dict(request.instance)
            elif request.manifest:
                inst = load_instance(request.manifest)
            else:
                raise HTTPException(status_code=422,
                                    detail="manifest or instance required")
            inst_obj = inst
        except InstanceError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        session = Session(id=uuid.uuid4().hex, instance=inst_obj,
                          options=request.options or {})
        thread = threading.Thread(target=_session_worker, args=(session,),
                                  daemon=True)
        session.thread = thread
        sessions[session.id] = session
        thread.start()
        return {"id": session.id}

    @app.get("/sessions/{session_id}")
    def get_state(session_id: str):
        return get_session(session_id).view()

    @app.post("/sessions/{session_id}/answer")
    def post_answer(session_id: str, request: AnswerRequest):
        session = get_session(session_id)
        with session.lock:
            awaiting = (session.status == "awaiting_answer"
                        and session.oracle.pending is not None)
        if not awaiting:
            raise HTTPException(status_code=409,
                                detail="session is not awaiting an answer")
        raw = request.answer
        if isinstance(raw, bool):
            value = raw
        elif raw.lower() in ("yes", "y", "true"):
            value = True
        elif raw.lower() in ("no", "n", "false"):
            value = False
        else:
            raise HTTPException(status_code=422, detail="answer must be yes/no")
        session.oracle.put_answer(value)
        # Wait briefly for the worker to advance so clients see fresh state.
        for _ in range(200):
            view = session.view()
            if view["status"] != "working":
                return view
            threading.Event().wait(0.01)
        return session.view()

    @app.post("/sessions/{session_id}/abort")
    def abort_session(session_id: str):
        session = get_session(session_id)
        with session.lock:
            if session.status in ("finished", "aborted", "failed"):
                return session.view()
        session.oracle.abort()
        if session.thread is not None:
            session.thread.join(timeout=5.0)
        return session.view()

    @app.get("/sessions/{session_id}/result")
    def get_result(session_id: str):
        session = get_session(session_id)
        view = session.view()
        if view["result"] is None:
            raise HTTPException(status_code=409, detail="session not finished")
        return view["result"]

    return app
