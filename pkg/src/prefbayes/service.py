"""HTTP elicitation service.

Sessions serve a pre-drawn schedule of non-dominated pairs, accept answers
carrying the client-measured response time and per-criterion hover
durations, and run inference in a background thread. Every mutation is
appended to a per-session JSON-lines event log first; replaying the log
from empty reconstructs the session exactly, and re-running inference with
the session seed reproduces the same result bundle.
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse

from .analytics import ResultBundle, build_result_bundle
from .domain import (
    Dataset,
    PreferenceRecord,
    Problem,
    problem_from_json,
    problem_to_json,
    validate_dataset,
)
from .harness import fit as fit_model
from .likelihood import VariantSpec
from .sampler import SamplerConfig, diagnostics
from .simulator import sample_pairs
from .valuefn import PiecewiseConfig

COLLECTING = "collecting"
INFERRING = "inferring"
DONE = "done"
FAILED = "failed"

DEFAULT_PLAN = {
    "pair_budget": 30,
    "variant": "i2",
    "gamma": 2,
    "samples": 10_000,
    "burnin": 1_000,
    "chains": 3,
    "seed": 0,
}


@dataclass
class Session:
    id: str
    problem_id: str
    plan: dict
    schedule: list[tuple[str, str]]
    sides: list[tuple[str, str]]  # (left, right) per scheduled pair
    answers: list[PreferenceRecord] = field(default_factory=list)
    status: str = COLLECTING
    progress: int = 0
    diagnostics: dict | None = None
    result: ResultBundle | None = None
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def snapshot(self) -> dict:
        return {
            "id": self.id,
            "problem_id": self.problem_id,
            "plan": self.plan,
            "status": self.status,
            "answered": len(self.answers),
            "budget": len(self.schedule),
            "progress": self.progress,
        }


def _schedule_for(problem: Problem, plan: dict) -> tuple[list, list]:
    ss = np.random.SeedSequence(int(plan["seed"]))
    pair_seed, side_seed = ss.generate_state(2).tolist()
    schedule = sample_pairs(problem, int(plan["pair_budget"]), pair_seed)
    side_rng = np.random.default_rng(side_seed)
    sides = []
    for a, b in schedule:
        sides.append((a, b) if side_rng.random() < 0.5 else (b, a))
    return schedule, sides


class ServiceState:
    """All sessions and problems, backed by append-only event logs."""

    def __init__(self, state_dir: str, bundled_problem: Problem | None = None):
        self.state_dir = state_dir
        self.problems: dict[str, Problem] = {}
        self.sessions: dict[str, Session] = {}
        self.registry_lock = threading.Lock()
        os.makedirs(os.path.join(state_dir, "problems"), exist_ok=True)
        os.makedirs(os.path.join(state_dir, "sessions"), exist_ok=True)
        if bundled_problem is not None:
            self.problems["default"] = bundled_problem
        self._load_problems()
        self._replay_sessions()

    # -- persistence ------------------------------------------------------

    def _problem_path(self, pid: str) -> str:
        return os.path.join(self.state_dir, "problems", f"{pid}.json")

    def _events_path(self, sid: str) -> str:
        return os.path.join(self.state_dir, "sessions", f"{sid}.events.jsonl")

    def _append_event(self, sid: str, event: dict) -> None:
        with open(self._events_path(sid), "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def _load_problems(self) -> None:
        root = os.path.join(self.state_dir, "problems")
        for name in sorted(os.listdir(root)):
            if name.endswith(".json"):
                with open(os.path.join(root, name), encoding="utf-8") as fh:
                    self.problems[name[:-5]] = problem_from_json(json.load(fh))

    def _replay_sessions(self) -> None:
        root = os.path.join(self.state_dir, "sessions")
        for name in sorted(os.listdir(root)):
            if not name.endswith(".events.jsonl"):
                continue
            sid = name[: -len(".events.jsonl")]
            events = []
            with open(os.path.join(root, name), encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        events.append(json.loads(line))
            session = self._rebuild(sid, events)
            if session is not None:
                self.sessions[sid] = session

    def _rebuild(self, sid: str, events: list[dict]) -> Session | None:
        session = None
        for ev in events:
            if ev["type"] == "created":
                problem = self.problems[ev["problem_id"]]
                schedule, sides = _schedule_for(problem, ev["plan"])
                session = Session(
                    id=sid,
                    problem_id=ev["problem_id"],
                    plan=ev["plan"],
                    schedule=schedule,
                    sides=sides,
                )
            elif ev["type"] == "answer" and session is not None:
                session.answers.append(PreferenceRecord.from_json(ev["record"]))
            elif ev["type"] == "inference_done" and session is not None:
                session.status = DONE
                session.diagnostics = ev.get("diagnostics")
                session.result = ResultBundle.from_json(ev["result"])
            elif ev["type"] == "inference_failed" and session is not None:
                session.status = FAILED
                session.diagnostics = ev.get("diagnostics")
        # An inference that was running at shutdown has no terminal event;
        # the session drops back to collecting and can be restarted.
        return session

    # -- operations -------------------------------------------------------

    def add_problem(self, payload: dict, pid: str | None = None) -> str:
        problem = problem_from_json(payload)
        pid = pid or uuid.uuid4().hex[:12]
        with self.registry_lock:
            if pid in self.problems:
                raise HTTPException(409, f"problem {pid!r} already exists")
            self.problems[pid] = problem
        with open(self._problem_path(pid), "w", encoding="utf-8") as fh:
            json.dump(problem_to_json(problem), fh, indent=2)
        return pid

    def create_session(self, problem_id: str, plan_patch: dict) -> Session:
        if problem_id not in self.problems:
            raise HTTPException(404, f"unknown problem {problem_id!r}")
        plan = {**DEFAULT_PLAN, **plan_patch}
        unknown = set(plan) - set(DEFAULT_PLAN)
        if unknown:
            raise HTTPException(422, f"unknown plan fields: {sorted(unknown)}")
        VariantSpec.from_code(plan["variant"])
        if plan["pair_budget"] < 1:
            raise HTTPException(422, "pair_budget must be >= 1")
        problem = self.problems[problem_id]
        try:
            schedule, sides = _schedule_for(problem, plan)
        except ValueError as exc:
            raise HTTPException(422, str(exc)) from None
        sid = uuid.uuid4().hex[:12]
        session = Session(
            id=sid, problem_id=problem_id, plan=plan, schedule=schedule, sides=sides
        )
        self._append_event(sid, {"type": "created", "problem_id": problem_id, "plan": plan})
        with self.registry_lock:
            self.sessions[sid] = session
        return session

    def get_session(self, sid: str) -> Session:
        try:
            return self.sessions[sid]
        except KeyError:
            raise HTTPException(404, f"unknown session {sid!r}") from None

    def next_pair_payload(self, session: Session) -> dict:
        problem = self.problems[session.problem_id]
        with session.lock:
            if session.status != COLLECTING:
                raise HTTPException(409, f"session is {session.status}, not collecting")
            k = len(session.answers)
            if k >= len(session.schedule):
                return {"complete": True, "answered": k}
            left, right = session.sides[k]

            def alt_payload(alt_id):
                i = problem.alt_index(alt_id)
                return {
                    "id": alt_id,
                    "name": problem.alternatives[i].name,
                    "performances": {
                        c.id: problem.performances[i][j]
                        for j, c in enumerate(problem.criteria)
                    },
                }

            return {
                "complete": False,
                "index": k,
                "budget": len(session.schedule),
                "criteria": [
                    {"id": c.id, "name": c.name, "direction": c.direction}
                    for c in problem.criteria
                ],
                "left": alt_payload(left),
                "right": alt_payload(right),
            }

    def submit_answer(self, session: Session, payload: dict) -> dict:
        problem = self.problems[session.problem_id]
        try:
            record = PreferenceRecord.from_json(payload)
        except (KeyError, TypeError, ValueError) as exc:
            raise HTTPException(422, f"malformed record: {exc}") from None
        with session.lock:
            if session.status != COLLECTING:
                raise HTTPException(409, f"session is {session.status}, not collecting")
            k = len(session.answers)
            if k >= len(session.schedule):
                raise HTTPException(409, "all scheduled pairs already answered")
            served = set(session.schedule[k])
            if set(record.pair) != served:
                raise HTTPException(
                    409,
                    f"pair mismatch: served {sorted(served)}, got {sorted(record.pair)}",
                )
            violations = validate_dataset(
                Dataset(session.problem_id, [record]), problem
            )
            if violations:
                raise HTTPException(422, "; ".join(violations))
            self._append_event(session.id, {"type": "answer", "record": record.to_json()})
            session.answers.append(record)
            return {"accepted": True, "answered": len(session.answers)}

    def start_inference(self, session: Session) -> dict:
        with session.lock:
            if session.status == INFERRING:
                raise HTTPException(409, "inference already running")
            if not session.answers:
                raise HTTPException(409, "no answers to infer from")
            session.status = INFERRING
            session.progress = 0
        thread = threading.Thread(
            target=self._run_inference, args=(session,), daemon=True
        )
        thread.start()
        return {"status": INFERRING, "session": session.id}

    def _run_inference(self, session: Session) -> None:
        problem = self.problems[session.problem_id]
        plan = session.plan
        try:
            spec = VariantSpec.from_code(plan["variant"])
            config = PiecewiseConfig.shared(problem, int(plan["gamma"]))
            dataset = Dataset(session.problem_id, list(session.answers))
            cfg = SamplerConfig(
                draws=int(plan["samples"]),
                warmup=int(plan["burnin"]),
                chains=int(plan["chains"]),
                seed=int(plan["seed"]),
            )
            def on_chain(done):
                session.progress = done

            samples = fit_model(
                dataset, problem, config, spec, cfg, progress_callback=on_chain
            )
            diag = diagnostics(samples)
            bundle = build_result_bundle(samples, problem, config, diagnostics=diag)
            with session.lock:
                self._append_event(
                    session.id,
                    {
                        "type": "inference_done",
                        "diagnostics": diag,
                        "result": bundle.to_json(),
                    },
                )
                session.diagnostics = diag
                session.result = bundle
                session.status = DONE
        except Exception as exc:  # background thread: record, never raise
            with session.lock:
                info = {"error": str(exc)}
                self._append_event(
                    session.id, {"type": "inference_failed", "diagnostics": info}
                )
                session.diagnostics = info
                session.status = FAILED


def create_app(state_dir: str, bundled_problem: Problem | None = None) -> FastAPI:
    state = ServiceState(state_dir, bundled_problem)
    app = FastAPI(title="prefbayes", version="0.1.0")
    app.state.service = state

    @app.post("/problems", status_code=201)
    def post_problem(payload: dict):
        try:
            pid = state.add_problem(payload.get("problem", payload), payload.get("id"))
        except HTTPException:
            raise
        except Exception as exc:
            raise HTTPException(422, f"invalid problem: {exc}") from None
        return {"id": pid}

    @app.get("/problems/{pid}")
    def get_problem(pid: str):
        if pid not in state.problems:
            raise HTTPException(404, f"unknown problem {pid!r}")
        return {"id": pid, "problem": problem_to_json(state.problems[pid])}

    @app.post("/sessions", status_code=201)
    def post_session(payload: dict):
        session = state.create_session(
            payload.get("problem_id", "default"), payload.get("plan", {})
        )
        return session.snapshot()

    @app.get("/sessions/{sid}")
    def get_session(sid: str):
        return state.get_session(sid).snapshot()

    @app.get("/sessions/{sid}/next-pair")
    def next_pair(sid: str):
        return state.next_pair_payload(state.get_session(sid))

    @app.post("/sessions/{sid}/answers")
    def post_answer(sid: str, payload: dict):
        return state.submit_answer(state.get_session(sid), payload)

    @app.post("/sessions/{sid}/inference", status_code=202)
    def post_inference(sid: str):
        return state.start_inference(state.get_session(sid))

    @app.get("/sessions/{sid}/results")
    def get_results(sid: str):
        session = state.get_session(sid)
        if session.status == DONE and session.result is not None:
            return {"status": DONE, "result": session.result.to_json()}
        if session.status == FAILED:
            return JSONResponse(
                status_code=200,
                content={"status": FAILED, "diagnostics": session.diagnostics},
            )
        return {
            "status": session.status,
            "progress": session.progress,
            "chains": session.plan["chains"],
        }

    return app
