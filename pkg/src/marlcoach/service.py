"""Interactive session service.

Runs training in a background thread and pauses at every feedback phase:
the session enters ``awaiting_feedback`` with the phase's evaluation
replays available for download, accepts exactly one utterance (or a skip)
for that phase, and resumes. Unattended phases auto-skip after the
configured timeout so sessions always terminate.

API (all bodies JSON, all documents versioned):

* ``POST /sessions`` ``{"seed": int?}`` -> 200 ``{session_id}``
* ``GET /sessions/{id}`` -> 200 status view (state, generation, weights,
  pools, phase records, latest metrics)
* ``GET /sessions/{id}/generations/{k}/replays`` -> 200 replay document
* ``POST /sessions/{id}/generations/{k}/feedback`` ``{"text": str}``
  -> 200 ack with the parsed assignment echo
* ``POST /sessions/{id}/generations/{k}/skip`` -> 200 ack

404 unknown session, 409 wrong state or duplicate submission, 422
unparseable body. If MARLCOACH_SESSION_TOKEN is set, requests must carry
``Authorization: Bearer <token>``.
"""

from __future__ import annotations

import os
import threading
import uuid
from typing import Optional, Sequence

from fastapi import FastAPI, HTTPException, Request
from pydantic import BaseModel

from .cli import build_provider_parser_engine
from .feedback import ParsedFeedback, Utterance, parse_dsl
from .learning import PhaseRecord, run_phased_training
from .reporting import build_report
from .rewards import baseline_pools
from .rollouts import Trajectory, serialize_replay
from .runconfig import RunConfig

SESSION_SCHEMA = "session/1"


class FeedbackBody(BaseModel):
    text: str


class _PhaseGate:
    """Hands one utterance (or a skip) from the HTTP side to the training thread."""

    def __init__(self) -> None:
        self.event = threading.Event()
        self.text: Optional[str] = None
        self.answered = False


class Session:
    def __init__(self, session_id: str, cfg: RunConfig, seed: int) -> None:
        self.id = session_id
        self.cfg = cfg
        self.seed = seed
        self.lock = threading.Lock()
        self.state = "training"
        self.current_phase: Optional[int] = None
        self.generation = 0
        self.phases: list[PhaseRecord] = []
        self.replays: dict[int, str] = {}
        self.pools = baseline_pools(3, alpha=cfg.alpha, beta=cfg.beta)
        self.metrics: list[dict] = []
        self.error: Optional[str] = None
        self.gate: Optional[_PhaseGate] = None
        self.report: Optional[dict] = None
        self.thread = threading.Thread(target=self._run, daemon=True)

    # -- provider contract, called from the training thread ------------------

    def provide(self, trajs: Sequence[Trajectory], generation: int) -> Optional[Utterance]:
        gate = _PhaseGate()
        with self.lock:
            self.replays[generation] = serialize_replay(
                trajs, layout_id=self.cfg.layout, recipe=self.cfg.recipe, generation=generation
            )
            self.state = "awaiting_feedback"
            self.current_phase = generation
            self.gate = gate
        gate.event.wait(timeout=self.cfg.feedback.phase_timeout)
        with self.lock:
            self.state = "training"
            self.current_phase = None
            self.gate = None
        if gate.text is None:
            return None  # skipped or timed out
        return Utterance(text=gate.text, source="human-ui", generation=generation)

    def _on_phase(self, record: PhaseRecord) -> None:
        with self.lock:
            self.phases.append(record)
            self.generation = record.generation + 1

    def _run(self) -> None:
        try:
            _, parser, engine = build_provider_parser_engine(self.cfg)
            result = run_phased_training(
                env_factory=self.cfg.env_factory(),
                cfg=self.cfg.generation_config(),
                generations=self.cfg.generations,
                pools=self.pools,
                provider=self,
                parser=parser,
                template_engine=engine,
                seed=self.seed,
                eval_horizon=self.cfg.eval_horizon,
                on_phase=self._on_phase,
            )
            self.metrics = result.metrics
            self.report = build_report(self.cfg.to_dict(), [result])
            with self.lock:
                self.state = "done"
        except Exception as e:  # noqa: BLE001 - surfaced through the status view
            with self.lock:
                self.state = "failed"
                self.error = str(e)

    # -- HTTP-side actions ----------------------------------------------------

    def submit(self, generation: int, text: str) -> ParsedFeedback:
        with self.lock:
            if self.state != "awaiting_feedback" or self.gate is None:
                raise HTTPException(status_code=409, detail="session is not awaiting feedback")
            if self.current_phase != generation:
                raise HTTPException(
                    status_code=409,
                    detail=f"awaiting feedback for generation {self.current_phase}, not {generation}",
                )
            if self.gate.answered:
                raise HTTPException(status_code=409, detail="this phase already received feedback")
            self.gate.answered = True
            self.gate.text = text
            gate = self.gate
        gate.event.set()
        return parse_dsl(text, 3)

    def skip(self, generation: int) -> None:
        with self.lock:
            if self.state != "awaiting_feedback" or self.gate is None:
                raise HTTPException(status_code=409, detail="session is not awaiting feedback")
            if self.current_phase != generation:
                raise HTTPException(
                    status_code=409,
                    detail=f"awaiting feedback for generation {self.current_phase}, not {generation}",
                )
            if self.gate.answered:
                raise HTTPException(status_code=409, detail="this phase already received feedback")
            self.gate.answered = True
            self.gate.text = None
            gate = self.gate
        gate.event.set()

    def status(self) -> dict:
        with self.lock:
            return {
                "schema": SESSION_SCHEMA,
                "session_id": self.id,
                "state": self.state,
                "generation": self.generation,
                "awaiting_generation": self.current_phase,
                "total_generations": self.cfg.generations,
                "error": self.error,
                "latest_metrics": self.metrics[-1] if self.metrics else None,
                "weights": {str(a): list(p.weights) for a, p in sorted(self.pools.items())},
                "pools": {str(a): p.to_dict() for a, p in sorted(self.pools.items())},
                "phases": [
                    {
                        "generation": p.generation,
                        "r_ori": p.r_ori,
                        "skipped": p.skipped,
                        "utterance": p.utterance,
                        "parsed": p.parsed,
                        "rewards": {str(a): r for a, r in sorted(p.rewards.items())},
                        "weights_after": {str(a): w for a, w in sorted(p.weights_after.items())},
                    }
                    for p in self.phases
                ],
                "replay_generations": sorted(self.replays),
            }


def create_app(cfg: RunConfig) -> FastAPI:
    app = FastAPI(title="marlcoach session service")
    sessions: dict[str, Session] = {}
    token = os.environ.get("MARLCOACH_SESSION_TOKEN", "")

    def check_auth(request: Request) -> None:
        if token and request.headers.get("Authorization") != f"Bearer {token}":
            raise HTTPException(status_code=401, detail="missing or invalid token")

    def get_session(session_id: str) -> Session:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return session

    class CreateBody(BaseModel):
        seed: Optional[int] = None

    @app.post("/sessions")
    def create_session(request: Request, body: Optional[CreateBody] = None) -> dict:
        check_auth(request)
        seed = body.seed if body is not None and body.seed is not None else cfg.seeds[0]
        session = Session(uuid.uuid4().hex[:12], cfg, seed)
        sessions[session.id] = session
        session.thread.start()
        return {"schema": SESSION_SCHEMA, "session_id": session.id, "seed": seed}

    @app.get("/sessions/{session_id}")
    def session_status(session_id: str, request: Request) -> dict:
        check_auth(request)
        return get_session(session_id).status()

    @app.get("/sessions/{session_id}/generations/{generation}/replays")
    def session_replays(session_id: str, generation: int, request: Request) -> dict:
        check_auth(request)
        session = get_session(session_id)
        with session.lock:
            doc = session.replays.get(generation)
        if doc is None:
            raise HTTPException(status_code=404, detail=f"no replays for generation {generation}")
        return {"schema": SESSION_SCHEMA, "generation": generation, "document": doc}

    @app.post("/sessions/{session_id}/generations/{generation}/feedback")
    def session_feedback(session_id: str, generation: int, body: FeedbackBody, request: Request) -> dict:
        check_auth(request)
        session = get_session(session_id)
        parsed = session.submit(generation, body.text)
        return {
            "schema": SESSION_SCHEMA,
            "accepted": True,
            "generation": generation,
            "parsed": parsed.to_dict(),
        }

    @app.post("/sessions/{session_id}/generations/{generation}/skip")
    def session_skip(session_id: str, generation: int, request: Request) -> dict:
        check_auth(request)
        session = get_session(session_id)
        session.skip(generation)
        return {"schema": SESSION_SCHEMA, "accepted": True, "generation": generation, "skipped": True}

    @app.get("/sessions/{session_id}/report")
    def session_report(session_id: str, request: Request) -> dict:
        check_auth(request)
        session = get_session(session_id)
        if session.report is None:
            raise HTTPException(status_code=409, detail="session has not finished")
        return session.report

    return app
