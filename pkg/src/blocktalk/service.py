"""Session-oriented HTTP API over the online learner.

One live adaptation session per id; strict predict -> feedback alternation;
training runs synchronously inside the feedback call so the interaction loop
stays causally ordered.  Sessions expire after an idle timeout.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import asdict, replace
from typing import List, Optional

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from . import world
from .models import Model
from .online import (AdaptConfig, AdaptSession, InvalidScopeError,
                     NoPendingPredictionError, PendingFeedbackError)


class PredictBody(BaseModel):
    utt: List[str]
    start: List[str]


class FeedbackBody(BaseModel):
    target: List[str]


class LiveSession:
    def __init__(self, session: AdaptSession):
        self.session = session
        self.created = time.monotonic()
        self.last_active = self.created
        self.lock = threading.Lock()

    def touch(self):
        self.last_active = time.monotonic()


def _state_or_422(tokens, what):
    try:
        return world.deserialize_state(tokens)
    except world.FormatError as err:
        raise HTTPException(status_code=422, detail=f"bad {what}: {err}")


def create_app(model: Model, default_config: Optional[AdaptConfig] = None,
               idle_seconds: float = 3600.0, cors_origins=("*",)) -> FastAPI:
    default_config = default_config or AdaptConfig()
    app = FastAPI(title="blocktalk live teaching API")
    app.add_middleware(
        CORSMiddleware, allow_origins=list(cors_origins), allow_methods=["*"],
        allow_headers=["*"],
    )
    store: dict = {}
    store_lock = threading.Lock()

    def purge():
        now = time.monotonic()
        with store_lock:
            dead = [sid for sid, live in store.items()
                    if now - live.last_active > idle_seconds]
            for sid in dead:
                del store[sid]

    def get_live(sid) -> LiveSession:
        purge()
        with store_lock:
            live = store.get(sid)
        if live is None:
            raise HTTPException(status_code=404, detail="unknown session")
        live.touch()
        return live

    @app.post("/sessions")
    def create_session(overrides: Optional[dict] = None):
        purge()
        try:
            config = replace(default_config, **(overrides or {}))
        except (TypeError, ValueError, InvalidScopeError) as err:
            raise HTTPException(status_code=400, detail=str(err))
        session = AdaptSession(model, config)
        sid = uuid.uuid4().hex
        with store_lock:
            store[sid] = LiveSession(session)
        return {"id": sid, "config": asdict(config)}

    @app.post("/sessions/{sid}/predict")
    def predict(sid: str, body: PredictBody):
        live = get_live(sid)
        if not body.utt or any(not t for t in body.utt):
            raise HTTPException(status_code=422, detail="bad utterance")
        start = _state_or_422(body.start, "start state")
        with live.lock:
            try:
                predicted, selected = live.session.observe(
                    tuple(body.utt), start)
            except PendingFeedbackError as err:
                raise HTTPException(status_code=409, detail=str(err))
        return {"predicted": list(predicted), "selected_model": selected,
                "t": live.session.t + 1}

    @app.post("/sessions/{sid}/feedback")
    def feedback(sid: str, body: FeedbackBody):
        live = get_live(sid)
        target = _state_or_422(body.target, "target state")
        with live.lock:
            try:
                record = live.session.feedback(target)
            except NoPendingPredictionError as err:
                raise HTTPException(status_code=409, detail=str(err))
            accuracy = live.session.online_accuracy
        return {"correct": record.correct, "online_accuracy": accuracy,
                "t": record.t}

    @app.get("/sessions/{sid}")
    def get_state(sid: str):
        live = get_live(sid)
        with live.lock:
            session = live.session
            running = 0
            trace = []
            for i, rec in enumerate(session.log, start=1):
                running += int(rec.correct)
                trace.append({"t": rec.t, "correct": rec.correct,
                              "accuracy": running / i})
            last_losses = session.log[-1].losses if session.log else None
            return {
                "t": session.t,
                "online_accuracy": session.online_accuracy,
                "trace": trace,
                "config": asdict(session.config),
                "losses": last_losses,
                "buffer_size": len(session.buffer),
                "pending": session.pending is not None,
                "quarantined": [int(i) for i in
                                session.quarantined.nonzero()[0]],
            }

    @app.delete("/sessions/{sid}")
    def delete_session(sid: str):
        get_live(sid)
        with store_lock:
            store.pop(sid, None)
        return {"deleted": True}

    return app


def serve(checkpoint_path, port=8787, host="127.0.0.1", config_path=None):
    import json

    import uvicorn

    from .models import load_checkpoint

    model = load_checkpoint(checkpoint_path)
    config = AdaptConfig()
    if config_path:
        with open(config_path) as fh:
            config = AdaptConfig(**json.load(fh))
    app = create_app(model, config)
    uvicorn.run(app, host=host, port=port, log_level="warning")
