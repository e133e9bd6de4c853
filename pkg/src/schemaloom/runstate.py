"""Domain types for pipeline runs: feedback, snapshots, manifests, tickets."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from schemaloom import SchemaloomError
from schemaloom.model import DuplicateGroup, SchemaDiff, SchemaDoc, serialize_canonical
from schemaloom.prompts import StageId


class FeedbackChannel(Enum):
    DESCRIPTIVE = "Descriptive"
    EDITED = "Edited"
    COMBINED = "Combined"
    NONE = "None"


class Cadence(Enum):
    FIRST_ITERATION_ONLY = "FirstIterationOnly"
    EVERY_ITERATION = "EveryIteration"
    NEVER = "Never"


@dataclass(frozen=True)
class FeedbackMode:
    """Which feedback channel is allowed and when review gates open.

    Exactly seven combinations are legal: the three real channels crossed
    with the two gating cadences, plus the no-feedback baseline.
    """

    channel: FeedbackChannel
    cadence: Cadence

    def __post_init__(self):
        none_channel = self.channel is FeedbackChannel.NONE
        never = self.cadence is Cadence.NEVER
        if none_channel != never:
            raise ValueError("channel None and cadence Never imply each other")

    def gate_open(self, iteration: int) -> bool:
        if self.cadence is Cadence.EVERY_ITERATION:
            return True
        if self.cadence is Cadence.FIRST_ITERATION_ONLY:
            return iteration == 1
        return False

    def to_json_dict(self) -> dict:
        return {"channel": self.channel.value, "cadence": self.cadence.value}

    @classmethod
    def from_json_dict(cls, data: dict) -> "FeedbackMode":
        return cls(FeedbackChannel(data["channel"]), Cadence(data["cadence"]))


NO_FEEDBACK = FeedbackMode(FeedbackChannel.NONE, Cadence.NEVER)


@dataclass(frozen=True)
class Feedback:
    """An expert's submission at a review gate: text and/or an edited schema."""

    descriptive: Optional[str] = None
    edited_schema: Optional[SchemaDoc] = None
    author: str = "expert"
    submitted_at: str = ""

    def __post_init__(self):
        if self.descriptive is None and self.edited_schema is None:
            raise ValueError("feedback needs descriptive text or an edited schema")

    def to_json_dict(self) -> dict:
        return {
            "descriptive": self.descriptive,
            "edited_schema": (
                serialize_canonical(self.edited_schema) if self.edited_schema else None
            ),
            "author": self.author,
            "submitted_at": self.submitted_at,
        }


@dataclass(frozen=True)
class Snapshot:
    """One persisted schema state with provenance."""

    run_id: str
    stage: StageId
    iteration: int
    schema: SchemaDoc
    source_doc: Optional[str] = None
    feedback_applied: Optional[Feedback] = None
    llm_attempts: int = 1
    created_at: str = ""


class RunStatus(Enum):
    RUNNING = "Running"
    AWAITING_FEEDBACK = "AwaitingFeedback"
    COMPLETED = "Completed"
    FAILED = "Failed"


@dataclass
class RunManifest:
    run_id: str
    status: RunStatus
    feedback_mode: FeedbackMode
    model_digest: str = ""
    template_digest: str = ""
    corpus_digests: dict[str, str] = field(default_factory=dict)
    corpus_dirs: dict[str, str] = field(default_factory=dict)
    cursor: Optional[tuple[str, int]] = None  # (stage value, next iteration)
    error: Optional[str] = None
    determinism_note: Optional[str] = None
    created_at: str = ""
    updated_at: str = ""

    def to_json_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "status": self.status.value,
            "feedback_mode": self.feedback_mode.to_json_dict(),
            "model_digest": self.model_digest,
            "template_digest": self.template_digest,
            "corpus_digests": self.corpus_digests,
            "corpus_dirs": self.corpus_dirs,
            "cursor": list(self.cursor) if self.cursor else None,
            "error": self.error,
            "determinism_note": self.determinism_note,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "RunManifest":
        return cls(
            run_id=data["run_id"],
            status=RunStatus(data["status"]),
            feedback_mode=FeedbackMode.from_json_dict(data["feedback_mode"]),
            model_digest=data.get("model_digest", ""),
            template_digest=data.get("template_digest", ""),
            corpus_digests=dict(data.get("corpus_digests", {})),
            corpus_dirs=dict(data.get("corpus_dirs", {})),
            cursor=tuple(data["cursor"]) if data.get("cursor") else None,
            error=data.get("error"),
            determinism_note=data.get("determinism_note"),
            created_at=data.get("created_at", ""),
            updated_at=data.get("updated_at", ""),
        )


# The four review questions every gate presents, shared verbatim by every
# client surface (CLI, HTTP service, UI).
GUIDING_QUESTIONS = (
    "Should any properties be merged, and what would you name the merged property?",
    "Which properties should be grouped into a single unit, and how would you describe it?",
    "Are there any essential properties missing?",
    "Are the current property descriptions clear and comprehensive?",
)


@dataclass(frozen=True)
class ReviewTicket:
    """Everything an expert needs at a gate: the schema under review, the one
    before it, their diff, duplicate warnings, and the guiding questions."""

    run_id: str
    stage: StageId
    iteration: int
    current: SchemaDoc
    previous: SchemaDoc
    diff: SchemaDiff
    duplicates: tuple[DuplicateGroup, ...]
    source_doc: Optional[str] = None
    guiding_questions: tuple[str, ...] = GUIDING_QUESTIONS

    def to_json_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "stage": self.stage.value,
            "iteration": self.iteration,
            "current": serialize_canonical(self.current),
            "previous": serialize_canonical(self.previous),
            "diff": self.diff.to_json_dict(),
            "duplicates": [g.to_json_dict() for g in self.duplicates],
            "source_doc": self.source_doc,
            "guiding_questions": list(self.guiding_questions),
        }


class RunError(SchemaloomError):
    pass


class UnknownRun(RunError):
    def __init__(self, run_id: str):
        super().__init__(f"no such run: {run_id}")
        self.run_id = run_id


class DigestMismatch(RunError):
    pass


class NoPendingTicket(RunError):
    pass


class StaleTicket(RunError):
    pass


class FeedbackChannelMismatch(RunError):
    pass


class InvalidEditedSchema(RunError):
    def __init__(self, detail: str, line: int = 0, column: int = 0):
        super().__init__(detail)
        self.line = line
        self.column = column
