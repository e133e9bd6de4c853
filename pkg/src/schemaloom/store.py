"""On-disk snapshot store shared by the pipeline, the CLI, and the service.

Layout under the runs root:

    {run_id}/manifest.json
    {run_id}/{Stage}/{iteration:03}.schema.json     canonical schema text
    {run_id}/{Stage}/{iteration:03}.meta.json       provenance
    {run_id}/{Stage}/{iteration:03}.feedback.json   when feedback was applied
    {run_id}/pending_review.json                    open gate, if any
    {run_id}/inbox/{Stage}-{iteration:03}.feedback.json   submitted feedback

Writes go through a temp file + rename; the feedback inbox uses exclusive
creation so double submissions lose deterministically.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Optional

from schemaloom.corpus import Corpus
from schemaloom.gateway import ModelConfig
from schemaloom.model import parse_schema
from schemaloom.prompts import StageId, TemplateSet
from schemaloom.runstate import (
    Feedback,
    ReviewTicket,
    RunManifest,
    Snapshot,
    UnknownRun,
)

_STAGE_ORDER = [StageId.GENERATE, StageId.REFINE, StageId.FINALIZE]


def _dump(data: dict) -> str:
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def corpus_digest(corpus: Corpus) -> str:
    entries = [(doc.id, _sha256(doc.body)) for doc in corpus.docs]
    return _sha256(json.dumps(entries))


def model_digest(cfg: ModelConfig) -> str:
    # The API key stays out of anything persisted.
    fields = {
        "base_url": cfg.base_url,
        "model_name": cfg.model_name,
        "temperature": cfg.temperature,
        "context_limit": cfg.context_limit,
        "completion_reserve": cfg.completion_reserve,
        "max_repair_attempts": cfg.max_repair_attempts,
    }
    return _sha256(json.dumps(fields, sort_keys=True))


def template_digest(templates: TemplateSet) -> str:
    texts = []
    for t in (templates.generate, templates.refine, templates.finalize):
        texts += [t.role, t.task, t.input_format, t.output_format, t.user_layout]
    return _sha256(json.dumps(texts))


class SnapshotStore:
    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    # -- paths ------------------------------------------------------------

    def run_dir(self, run_id: str) -> Path:
        return self.root / run_id

    def _stage_dir(self, run_id: str, stage: StageId) -> Path:
        return self.run_dir(run_id) / stage.value

    def schema_path(self, run_id: str, stage: StageId, iteration: int) -> Path:
        return self._stage_dir(run_id, stage) / f"{iteration:03}.schema.json"

    def meta_path(self, run_id: str, stage: StageId, iteration: int) -> Path:
        return self._stage_dir(run_id, stage) / f"{iteration:03}.meta.json"

    def feedback_path(self, run_id: str, stage: StageId, iteration: int) -> Path:
        return self._stage_dir(run_id, stage) / f"{iteration:03}.feedback.json"

    def pending_ticket_path(self, run_id: str) -> Path:
        return self.run_dir(run_id) / "pending_review.json"

    def inbox_path(self, run_id: str, stage: StageId, iteration: int) -> Path:
        return self.run_dir(run_id) / "inbox" / f"{stage.value}-{iteration:03}.feedback.json"

    def _write(self, path: Path, text: str) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, path)

    # -- manifests ---------------------------------------------------------

    def list_runs(self) -> list[str]:
        return sorted(
            p.name for p in self.root.iterdir()
            if p.is_dir() and (p / "manifest.json").is_file()
        )

    def save_manifest(self, manifest: RunManifest) -> None:
        self._write(self.run_dir(manifest.run_id) / "manifest.json", _dump(manifest.to_json_dict()))

    def load_manifest(self, run_id: str) -> RunManifest:
        path = self.run_dir(run_id) / "manifest.json"
        if not path.is_file():
            raise UnknownRun(run_id)
        return RunManifest.from_json_dict(json.loads(path.read_text(encoding="utf-8")))

    # -- snapshots ----------------------------------------------------------

    def save_snapshot(self, snapshot: Snapshot) -> None:
        from schemaloom.model import serialize_canonical

        run_id, stage, i = snapshot.run_id, snapshot.stage, snapshot.iteration
        self._write(self.schema_path(run_id, stage, i), serialize_canonical(snapshot.schema))
        meta = {
            "stage": stage.value,
            "iteration": i,
            "source_doc": snapshot.source_doc,
            "llm_attempts": snapshot.llm_attempts,
            "created_at": snapshot.created_at,
            "feedback_applied": snapshot.feedback_applied is not None,
        }
        self._write(self.meta_path(run_id, stage, i), _dump(meta))
        if snapshot.feedback_applied is not None:
            self._write(
                self.feedback_path(run_id, stage, i),
                _dump(snapshot.feedback_applied.to_json_dict()),
            )

    def load_snapshot(self, run_id: str, stage: StageId, iteration: int) -> Snapshot:
        schema_path = self.schema_path(run_id, stage, iteration)
        if not schema_path.is_file():
            raise UnknownRun(f"{run_id}/{stage.value}/{iteration:03}")
        meta = json.loads(self.meta_path(run_id, stage, iteration).read_text(encoding="utf-8"))
        return Snapshot(
            run_id=run_id,
            stage=stage,
            iteration=iteration,
            schema=parse_schema(schema_path.read_text(encoding="utf-8")),
            source_doc=meta.get("source_doc"),
            feedback_applied=self.load_iteration_feedback(run_id, stage, iteration),
            llm_attempts=meta.get("llm_attempts", 1),
            created_at=meta.get("created_at", ""),
        )

    def load_iteration_feedback(
        self, run_id: str, stage: StageId, iteration: int
    ) -> Optional[Feedback]:
        path = self.feedback_path(run_id, stage, iteration)
        if not path.is_file():
            return None
        return _feedback_from_json(json.loads(path.read_text(encoding="utf-8")))

    def list_snapshot_keys(self, run_id: str) -> list[tuple[StageId, int]]:
        """(stage, iteration) pairs in run order: Generate, Refine, Finalize."""
        keys = []
        for stage in _STAGE_ORDER:
            stage_dir = self._stage_dir(run_id, stage)
            if not stage_dir.is_dir():
                continue
            for path in sorted(stage_dir.glob("*.schema.json")):
                keys.append((stage, int(path.name.split(".")[0])))
        return keys

    def latest_snapshot(self, run_id: str) -> Optional[Snapshot]:
        keys = self.list_snapshot_keys(run_id)
        if not keys:
            return None
        stage, iteration = keys[-1]
        return self.load_snapshot(run_id, stage, iteration)

    # -- review tickets and the feedback inbox -------------------------------

    def save_pending_ticket(self, ticket: ReviewTicket) -> None:
        self._write(self.pending_ticket_path(ticket.run_id), _dump(ticket.to_json_dict()))

    def load_pending_ticket_raw(self, run_id: str) -> Optional[dict]:
        path = self.pending_ticket_path(run_id)
        if not path.is_file():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def clear_pending_ticket(self, run_id: str) -> None:
        path = self.pending_ticket_path(run_id)
        if path.is_file():
            path.unlink()

    def submit_feedback_exclusive(
        self, run_id: str, stage: StageId, iteration: int, feedback: Feedback
    ) -> None:
        """Write into the inbox; raises FileExistsError on double submission."""
        path = self.inbox_path(run_id, stage, iteration)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_EXCL)
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(_dump(feedback.to_json_dict()))

    def read_inbox_feedback(
        self, run_id: str, stage: StageId, iteration: int
    ) -> Optional[Feedback]:
        path = self.inbox_path(run_id, stage, iteration)
        if not path.is_file():
            return None
        return _feedback_from_json(json.loads(path.read_text(encoding="utf-8")))

    def consume_inbox_feedback(self, run_id: str, stage: StageId, iteration: int) -> None:
        path = self.inbox_path(run_id, stage, iteration)
        if path.is_file():
            path.unlink()


def _feedback_from_json(data: dict) -> Feedback:
    edited = data.get("edited_schema")
    return Feedback(
        descriptive=data.get("descriptive"),
        edited_schema=parse_schema(edited) if edited else None,
        author=data.get("author", "expert"),
        submitted_at=data.get("submitted_at", ""),
    )
