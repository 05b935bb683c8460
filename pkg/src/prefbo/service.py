"""HTTP/JSON facade over :class:`PreferenceExperiment` for live sessions.

One JSON file per session under a data directory; per-session locks
serialize mutations.  Endpoints:

    POST /sessions                      create a session
    GET  /sessions/{id}/next            outstanding pair (idempotent)
    POST /sessions/{id}/preference     record a judgment, refit
    GET  /sessions/{id}/history        comparisons and best trace
    GET  /sessions/{id}/export         full experiment state document

Outcome wire values are -1 / 0 / 1.
"""

from __future__ import annotations

import argparse
import json
import threading
import uuid
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .experiment import ExperimentConfig, PreferenceExperiment
from .model import ModelHyper

__all__ = ["create_app", "main"]

DEFAULT_DATA_DIR = "./prefbo-sessions"
#: cooperative wall-clock cap on each synchronous refit
REFIT_TIME_BUDGET_S = 30.0


class CreateSessionRequest(BaseModel):
    box: list[list[float]]
    labels: list[str] | None = None
    beta: float | None = None
    sigma_p: float | None = None
    kernel_variance: float | None = None
    seed: int | None = None
    fit_max_steps: int | None = None


class PreferenceRequest(BaseModel):
    x1: list[float]
    x2: list[float]
    order: int = Field(description="-1: x1 worse, 0: equivalent, 1: x1 better")


@dataclass
class _Session:
    id: str
    experiment: PreferenceExperiment
    labels: list[str]
    created: str
    updated: str
    last_consumed_pair: list | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class SessionStore:
    """Disk-backed session registry; one JSON document per session."""

    def __init__(self, data_dir: Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, _Session] = {}
        self._registry_lock = threading.Lock()

    def _path(self, session_id: str) -> Path:
        return self.data_dir / f"{session_id}.json"

    def create(self, experiment: PreferenceExperiment, labels: list[str]) -> _Session:
        session = _Session(id=uuid.uuid4().hex, experiment=experiment,
                           labels=labels, created=_now(), updated=_now())
        with self._registry_lock:
            self._sessions[session.id] = session
        self.save(session)
        return session

    def get(self, session_id: str) -> _Session:
        with self._registry_lock:
            if session_id in self._sessions:
                return self._sessions[session_id]
        path = self._path(session_id)
        if not path.exists():
            raise HTTPException(status_code=404, detail="unknown session id")
        doc = json.loads(path.read_text(encoding="utf-8"))
        session = _Session(
            id=doc["id"],
            experiment=PreferenceExperiment.from_dict(doc["experiment"]),
            labels=doc["labels"],
            created=doc["created"],
            updated=doc["updated"],
            last_consumed_pair=doc.get("last_consumed_pair"),
        )
        with self._registry_lock:
            return self._sessions.setdefault(session_id, session)

    def save(self, session: _Session) -> None:
        doc = {
            "id": session.id,
            "labels": session.labels,
            "created": session.created,
            "updated": session.updated,
            "last_consumed_pair": session.last_consumed_pair,
            "experiment": session.experiment.to_dict(),
        }
        self._path(session.id).write_text(json.dumps(doc), encoding="utf-8")


def _points_equal(a, b, tol: float = 1e-9) -> bool:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    return a.size == b.size and bool(np.all(np.abs(a - b) <= tol))


def create_app(data_dir=DEFAULT_DATA_DIR, seed: int | None = None) -> FastAPI:
    """Build the session-service application.

    ``seed`` salts per-session RNGs for sessions created without an
    explicit seed.
    """
    app = FastAPI(title="prefbo session service")
    store = SessionStore(Path(data_dir))
    counter = {"n": 0}
    counter_lock = threading.Lock()

    def _derived_seed() -> int | None:
        if seed is None:
            return None
        with counter_lock:
            n = counter["n"]
            counter["n"] += 1
        return int(np.random.SeedSequence([seed, n]).generate_state(1)[0])

    @app.post("/sessions")
    def create_session(body: CreateSessionRequest):
        try:
            hyper_kwargs = {}
            if body.beta is not None:
                hyper_kwargs["beta"] = body.beta
            if body.sigma_p is not None:
                hyper_kwargs["sigma_p"] = body.sigma_p
            if body.kernel_variance is not None:
                hyper_kwargs["kernel_variance"] = body.kernel_variance
            hyper = ModelHyper.for_box(body.box, **hyper_kwargs)
            config = ExperimentConfig()
            fit_overrides = {"time_budget_s": REFIT_TIME_BUDGET_S}
            if body.fit_max_steps is not None:
                fit_overrides["max_steps"] = body.fit_max_steps
            config = replace(config, fit=replace(config.fit, **fit_overrides))
            session_seed = body.seed if body.seed is not None else _derived_seed()
            experiment = PreferenceExperiment(body.box, hyper=hyper,
                                              config=config, seed=session_seed)
        except ValueError as err:
            raise HTTPException(status_code=400, detail=str(err)) from None
        labels = body.labels or [f"x{i + 1}" for i in range(experiment.box.dim)]
        if len(labels) != experiment.box.dim:
            raise HTTPException(status_code=400,
                                detail="labels must match the box dimension")
        session = store.create(experiment, labels)
        return {
            "id": session.id,
            "dim": experiment.box.dim,
            "labels": labels,
            "init_points": len(experiment.init_design),
        }

    @app.get("/sessions/{session_id}/next")
    def next_pair(session_id: str):
        session = store.get(session_id)
        with session.lock:
            x1, x2 = session.experiment.find_next()
            store.save(session)
            return {
                "pair": [x1.tolist(), x2.tolist()],
                "iteration": session.experiment.n_comparisons,
                "phase": session.experiment.phase,
            }

    @app.post("/sessions/{session_id}/preference")
    def post_preference(session_id: str, body: PreferenceRequest):
        session = store.get(session_id)
        with session.lock:
            exp = session.experiment
            if body.order not in (-1, 0, 1):
                raise HTTPException(status_code=400,
                                    detail="order must be -1, 0, or 1")
            posted = [body.x1, body.x2]
            if (not exp.matches_pending(body.x1, body.x2)
                    and session.last_consumed_pair is not None
                    and _points_equal(posted[0], session.last_consumed_pair[0])
                    and _points_equal(posted[1], session.last_consumed_pair[1])):
                raise HTTPException(
                    status_code=409,
                    detail="stale pair: this comparison was already recorded",
                )
            try:
                exp.prefer(body.x1, body.x2, body.order)
            except ValueError as err:
                raise HTTPException(status_code=400, detail=str(err)) from None
            session.last_consumed_pair = [list(body.x1), list(body.x2)]
            session.updated = _now()
            store.save(session)
            return {
                "best": exp.best.tolist(),
                "n_points": exp.n_points,
                "n_comparisons": exp.n_comparisons,
            }

    @app.get("/sessions/{session_id}/history")
    def get_history(session_id: str):
        session = store.get(session_id)
        with session.lock:
            exp = session.experiment
            comparisons = [
                {
                    "i": c.i,
                    "j": c.j,
                    "order": int(c.outcome),
                    "x1": exp.X[c.i].tolist(),
                    "x2": exp.X[c.j].tolist(),
                }
                for c in exp.comparisons
            ]
            best_trace = [exp.X[idx].tolist() for idx in exp.best_history]
            return {
                "comparisons": comparisons,
                "best_trace": best_trace,
                "best": None if exp.best is None else exp.best.tolist(),
                "labels": session.labels,
            }

    @app.get("/sessions/{session_id}/export")
    def export_session(session_id: str):
        session = store.get(session_id)
        with session.lock:
            return session.experiment.to_dict()

    return app


def main(argv=None) -> int:
    import os

    parser = argparse.ArgumentParser(
        prog="prefbo-service",
        description="Run the live preference-session HTTP service.",
    )
    env_seed = os.environ.get("PREFBO_SEED")
    parser.add_argument("--port", type=int,
                        default=int(os.environ.get("PREFBO_PORT", "8000")))
    parser.add_argument("--host", default=os.environ.get("PREFBO_HOST", "127.0.0.1"))
    parser.add_argument("--data-dir",
                        default=os.environ.get("PREFBO_DATA_DIR", DEFAULT_DATA_DIR))
    parser.add_argument("--seed", type=int,
                        default=int(env_seed) if env_seed is not None else None)
    args = parser.parse_args(argv)

    import uvicorn

    app = create_app(data_dir=args.data_dir, seed=args.seed)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    main()
