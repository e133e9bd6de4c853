"""Local HTTP service exposing run state and feedback gates.

The service is a read view over the snapshot store plus one mutation: feedback
submission, which unparks a pipeline waiting at a review gate. It holds no
run state of its own, so restarting it never loses anything. Binds loopback
by default; a bearer token guards the mutating endpoint when configured.
"""

from __future__ import annotations

import socket
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Header, HTTPException, Request
from fastapi.responses import PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from schemaloom import SchemaloomError
from schemaloom.model import diff, parse_schema
from schemaloom.pipeline import accept_feedback
from schemaloom.prompts import StageId
from schemaloom.runstate import (
    FeedbackChannelMismatch,
    InvalidEditedSchema,
    NoPendingTicket,
    StaleTicket,
    UnknownRun,
)
from schemaloom.store import SnapshotStore


class BindFailure(SchemaloomError):
    pass


class FeedbackBody(BaseModel):
    stage: str
    iteration: int
    descriptive: Optional[str] = None
    edited_schema: Optional[str] = None
    author: str = "expert"


@dataclass
class ServeConfig:
    runs_dir: Path
    host: str = "127.0.0.1"
    port: int = 8787
    auth_token: Optional[str] = None
    static_dir: Optional[Path] = None


def _http_error(status: int, exc: Exception) -> HTTPException:
    return HTTPException(
        status_code=status,
        detail={"error": type(exc).__name__, "message": str(exc)},
    )


def _stage_from_value(value: str) -> StageId:
    try:
        return StageId(value)
    except ValueError:
        raise HTTPException(status_code=404, detail={"error": "UnknownStage", "message": value})


def create_app(
    runs_dir: Path,
    auth_token: Optional[str] = None,
    static_dir: Optional[Path] = None,
) -> FastAPI:
    store = SnapshotStore(Path(runs_dir))
    app = FastAPI(title="schemaloom review service")

    def load_manifest(run_id: str):
        try:
            return store.load_manifest(run_id)
        except UnknownRun as exc:
            raise _http_error(404, exc)

    @app.get("/health", response_class=PlainTextResponse)
    def health() -> str:
        return "ok"

    @app.get("/runs")
    def list_runs() -> dict:
        runs = []
        for run_id in store.list_runs():
            manifest = store.load_manifest(run_id)
            runs.append(manifest.to_json_dict())
        return {"runs": runs}

    @app.get("/runs/{run_id}")
    def get_run(run_id: str) -> dict:
        return load_manifest(run_id).to_json_dict()

    @app.get("/runs/{run_id}/snapshots")
    def list_snapshots(run_id: str) -> dict:
        load_manifest(run_id)
        snapshots = []
        for stage, iteration in store.list_snapshot_keys(run_id):
            snap = store.load_snapshot(run_id, stage, iteration)
            snapshots.append(
                {
                    "stage": stage.value,
                    "iteration": iteration,
                    "source_doc": snap.source_doc,
                    "llm_attempts": snap.llm_attempts,
                    "created_at": snap.created_at,
                    "feedback_applied": snap.feedback_applied is not None,
                }
            )
        return {"run_id": run_id, "snapshots": snapshots}

    @app.get("/runs/{run_id}/snapshots/{stage}/{iteration}")
    def get_snapshot(run_id: str, stage: str, iteration: int) -> dict:
        load_manifest(run_id)
        stage_id = _stage_from_value(stage)
        path = store.schema_path(run_id, stage_id, iteration)
        if not path.is_file():
            raise HTTPException(
                status_code=404,
                detail={"error": "UnknownSnapshot", "message": f"{stage}/{iteration:03}"},
            )
        snap = store.load_snapshot(run_id, stage_id, iteration)
        return {
            "run_id": run_id,
            "stage": stage,
            "iteration": iteration,
            "schema": path.read_text(encoding="utf-8"),
            "source_doc": snap.source_doc,
            "llm_attempts": snap.llm_attempts,
            "created_at": snap.created_at,
            "feedback_applied": (
                snap.feedback_applied.to_json_dict() if snap.feedback_applied else None
            ),
        }

    @app.get("/runs/{run_id}/pending-review")
    def pending_review(run_id: str) -> dict:
        load_manifest(run_id)
        ticket = store.load_pending_ticket_raw(run_id)
        if ticket is None:
            raise HTTPException(
                status_code=404,
                detail={"error": "NoPendingTicket", "message": f"run {run_id} has no open gate"},
            )
        return ticket

    @app.get("/runs/{run_id}/diff/{stage}/{iter_a}/{iter_b}")
    def snapshot_diff(run_id: str, stage: str, iter_a: int, iter_b: int) -> dict:
        load_manifest(run_id)
        stage_id = _stage_from_value(stage)
        try:
            old = store.load_snapshot(run_id, stage_id, iter_a)
            new = store.load_snapshot(run_id, stage_id, iter_b)
        except UnknownRun as exc:
            raise _http_error(404, exc)
        return {
            "run_id": run_id,
            "stage": stage,
            "from_iteration": iter_a,
            "to_iteration": iter_b,
            "diff": diff(old.schema, new.schema).to_json_dict(),
        }

    @app.post("/runs/{run_id}/feedback")
    def submit_feedback(
        run_id: str,
        body: FeedbackBody,
        authorization: Optional[str] = Header(default=None),
    ) -> dict:
        if auth_token and authorization != f"Bearer {auth_token}":
            raise HTTPException(
                status_code=401,
                detail={"error": "Unauthorized", "message": "missing or wrong bearer token"},
            )
        try:
            feedback = accept_feedback(
                store,
                run_id,
                body.stage,
                body.iteration,
                descriptive=body.descriptive,
                edited_schema_text=body.edited_schema,
                author=body.author,
            )
        except UnknownRun as exc:
            raise _http_error(404, exc)
        except NoPendingTicket as exc:
            raise _http_error(404, exc)
        except StaleTicket as exc:
            raise _http_error(409, exc)
        except FeedbackChannelMismatch as exc:
            raise _http_error(422, exc)
        except InvalidEditedSchema as exc:
            raise HTTPException(
                status_code=422,
                detail={
                    "error": "InvalidEditedSchema",
                    "message": str(exc),
                    "line": exc.line,
                    "column": exc.column,
                },
            )
        return {
            "status": "accepted",
            "run_id": run_id,
            "stage": body.stage,
            "iteration": body.iteration,
            "submitted_at": feedback.submitted_at,
        }

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app


def serve(cfg: ServeConfig) -> None:
    """Run the service until interrupted; raises BindFailure up front when the
    port is taken so operators get a clean error instead of a stack trace."""
    import uvicorn

    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((cfg.host, cfg.port))
    except OSError as exc:
        raise BindFailure(f"cannot bind {cfg.host}:{cfg.port}: {exc}") from exc
    finally:
        probe.close()

    app = create_app(cfg.runs_dir, auth_token=cfg.auth_token, static_dir=cfg.static_dir)
    uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="warning")
