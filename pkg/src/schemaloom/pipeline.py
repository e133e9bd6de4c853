"""Three-stage schema mining pipeline with expert review gates.

Stage 1 generates an initial schema from the domain specification; stage 2
refines it over the curated paper set; stage 3 finalizes it over the extended
corpus. Gates open per the run's feedback mode: the expert reviews the
current schema before the next model call, and an expert-edited schema
replaces the working schema outright. Every snapshot is persisted with full
provenance and runs are resumable from their manifest cursor.
"""

from __future__ import annotations

import datetime as _dt
import secrets
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol, Sequence

from schemaloom import SchemaloomError
from schemaloom.corpus import Corpus, CorpusRole, load_corpus
from schemaloom.gateway import GatewayError, ModelConfig, complete_schema_with_repair
from schemaloom.model import (
    MalformedJson,
    SchemaError,
    diff,
    find_duplicates,
    parse_schema,
)
from schemaloom.prompts import (
    PromptPair,
    StageId,
    TemplateSet,
    TokenEstimator,
    estimate_tokens,
    fit_to_budget,
    render_finalize,
    render_generate,
    render_refine,
)
from schemaloom.runstate import (
    Cadence,
    DigestMismatch,
    Feedback,
    FeedbackChannel,
    FeedbackChannelMismatch,
    FeedbackMode,
    InvalidEditedSchema,
    NoPendingTicket,
    NO_FEEDBACK,
    ReviewTicket,
    RunManifest,
    RunStatus,
    Snapshot,
    StaleTicket,
    UnknownRun,
)
from schemaloom.store import SnapshotStore, corpus_digest, model_digest, template_digest

_STAGE_ROLE = {StageId.REFINE: CorpusRole.CURATED, StageId.FINALIZE: CorpusRole.EXTENDED}

DUPLICATE_REPORT_THRESHOLD = 0.8


class PipelineError(SchemaloomError):
    def __init__(self, message: str, run_id: str = "", stage: Optional[StageId] = None,
                 iteration: Optional[int] = None):
        super().__init__(message)
        self.run_id = run_id
        self.stage = stage
        self.iteration = iteration


class GateInterrupted(SchemaloomError):
    """The review gate stopped waiting; the run stays AwaitingFeedback."""


def utc_now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def new_run_id(clock: Callable[[], str] = utc_now) -> str:
    stamp = clock().replace(":", "").replace("-", "").rstrip("Z")
    return f"run-{stamp}-{secrets.token_hex(2)}"


@dataclass
class RunContext:
    """Everything a stage execution needs besides its corpus."""

    store: SnapshotStore
    model: ModelConfig
    templates: TemplateSet
    estimator: TokenEstimator = estimate_tokens
    clock: Callable[[], str] = utc_now
    sleep: Callable[[float], None] = time.sleep
    dup_threshold: float = DUPLICATE_REPORT_THRESHOLD


class ReviewGate(Protocol):
    def await_feedback(self, ticket: ReviewTicket) -> Feedback: ...


class ScriptedGate:
    """Feeds pre-baked feedback in order; records every ticket it sees."""

    def __init__(self, feedbacks: Sequence[Feedback]):
        self._queue = list(feedbacks)
        self.tickets: list[ReviewTicket] = []

    def await_feedback(self, ticket: ReviewTicket) -> Feedback:
        self.tickets.append(ticket)
        if not self._queue:
            raise GateInterrupted("scripted gate ran out of feedback")
        return self._queue.pop(0)


class StoreGate:
    """Blocks on the store's feedback inbox until a submission lands."""

    def __init__(
        self,
        store: SnapshotStore,
        poll_interval: float = 0.2,
        timeout: Optional[float] = None,
        on_wait: Optional[Callable[[ReviewTicket], None]] = None,
    ):
        self.store = store
        self.poll_interval = poll_interval
        self.timeout = timeout
        self.on_wait = on_wait

    def await_feedback(self, ticket: ReviewTicket) -> Feedback:
        if self.on_wait is not None:
            self.on_wait(ticket)
        deadline = None if self.timeout is None else time.monotonic() + self.timeout
        while True:
            feedback = self.store.read_inbox_feedback(ticket.run_id, ticket.stage, ticket.iteration)
            if feedback is not None:
                self.store.consume_inbox_feedback(ticket.run_id, ticket.stage, ticket.iteration)
                return feedback
            if deadline is not None and time.monotonic() > deadline:
                raise GateInterrupted(
                    f"no feedback for {ticket.run_id} {ticket.stage.value} "
                    f"iteration {ticket.iteration} within {self.timeout}s"
                )
            time.sleep(self.poll_interval)


# ---------------------------------------------------------------------------
# Feedback validation (shared by gates, the CLI, and the HTTP service)


def validate_feedback_channel(mode: FeedbackMode, feedback: Feedback) -> None:
    channel = mode.channel
    if channel is FeedbackChannel.NONE:
        raise FeedbackChannelMismatch("this run takes no feedback")
    if channel is FeedbackChannel.DESCRIPTIVE and feedback.edited_schema is not None:
        raise FeedbackChannelMismatch("descriptive-mode runs do not accept edited schemas")
    if channel is FeedbackChannel.EDITED and feedback.descriptive is not None:
        raise FeedbackChannelMismatch("edited-mode runs do not accept descriptive text")
    if channel is FeedbackChannel.DESCRIPTIVE and not feedback.descriptive:
        raise FeedbackChannelMismatch("descriptive-mode feedback needs descriptive text")
    if channel is FeedbackChannel.EDITED and feedback.edited_schema is None:
        raise FeedbackChannelMismatch("edited-mode feedback needs an edited schema")


def accept_feedback(
    store: SnapshotStore,
    run_id: str,
    stage_value: str,
    iteration: int,
    descriptive: Optional[str] = None,
    edited_schema_text: Optional[str] = None,
    author: str = "expert",
    clock: Callable[[], str] = utc_now,
) -> Feedback:
    """Validate and enqueue a feedback submission for a pending gate.

    Raises UnknownRun, NoPendingTicket, StaleTicket, FeedbackChannelMismatch,
    or InvalidEditedSchema; on success the parked pipeline picks it up.
    """
    manifest = store.load_manifest(run_id)
    ticket = store.load_pending_ticket_raw(run_id)
    if ticket is None:
        raise NoPendingTicket(f"run {run_id} has no open review gate")
    if ticket["stage"] != stage_value or ticket["iteration"] != iteration:
        raise StaleTicket(
            f"pending gate is {ticket['stage']} iteration {ticket['iteration']}, "
            f"not {stage_value} iteration {iteration}"
        )

    edited = None
    if edited_schema_text is not None:
        try:
            edited = parse_schema(edited_schema_text)
        except MalformedJson as exc:
            raise InvalidEditedSchema(
                f"edited schema does not parse: {exc}", line=exc.line, column=exc.column
            ) from exc
        except SchemaError as exc:
            raise InvalidEditedSchema(f"edited schema is invalid: {exc}") from exc

    if descriptive is None and edited is None:
        raise FeedbackChannelMismatch("feedback must carry descriptive text or an edited schema")
    feedback = Feedback(
        descriptive=descriptive, edited_schema=edited, author=author, submitted_at=clock()
    )
    validate_feedback_channel(manifest.feedback_mode, feedback)

    stage = StageId(stage_value)
    try:
        store.submit_feedback_exclusive(run_id, stage, iteration, feedback)
    except FileExistsError:
        raise StaleTicket("feedback for this gate was already submitted") from None
    return feedback


# ---------------------------------------------------------------------------
# Stage execution


def _touch_manifest(ctx: RunContext, manifest: RunManifest, **changes) -> None:
    for key, value in changes.items():
        setattr(manifest, key, value)
    manifest.updated_at = ctx.clock()
    ctx.store.save_manifest(manifest)


def _load_or_create_manifest(
    ctx: RunContext, run_id: str, mode: FeedbackMode
) -> RunManifest:
    try:
        return ctx.store.load_manifest(run_id)
    except UnknownRun:
        now = ctx.clock()
        note = None
        if ctx.model.temperature > 0:
            note = (
                f"temperature {ctx.model.temperature} > 0: completions are sampled, "
                "so replays against a live model may differ bit-for-bit"
            )
        return RunManifest(
            run_id=run_id,
            status=RunStatus.RUNNING,
            feedback_mode=mode,
            model_digest=model_digest(ctx.model),
            template_digest=template_digest(ctx.templates),
            determinism_note=note,
            created_at=now,
            updated_at=now,
        )


def run_stage1(
    ctx: RunContext,
    spec: Corpus,
    run_id: Optional[str] = None,
    mode: FeedbackMode = NO_FEEDBACK,
) -> Snapshot:
    """Generate the initial schema from the domain specification document."""
    if spec.role is not CorpusRole.SPECIFICATION or len(spec.docs) != 1:
        raise PipelineError(
            f"stage 1 needs a specification corpus with exactly one document, "
            f"got {len(spec.docs)} ({spec.role.value})"
        )
    run_id = run_id or new_run_id(ctx.clock)
    manifest = _load_or_create_manifest(ctx, run_id, mode)
    manifest.corpus_digests[CorpusRole.SPECIFICATION.value] = corpus_digest(spec)
    manifest.corpus_dirs[CorpusRole.SPECIFICATION.value] = str(spec.docs[0].origin.parent)
    _touch_manifest(ctx, manifest, status=RunStatus.RUNNING, cursor=(StageId.GENERATE.value, 0), error=None)

    prompt = render_generate(spec.docs[0].body, ctx.templates, ctx.estimator)
    try:
        schema, attempts, _ = _call_model(ctx, prompt)
    except (GatewayError, SchemaError) as exc:
        _touch_manifest(ctx, manifest, status=RunStatus.FAILED, error=str(exc))
        raise PipelineError(str(exc), run_id, StageId.GENERATE, 0) from exc

    snapshot = Snapshot(
        run_id=run_id,
        stage=StageId.GENERATE,
        iteration=0,
        schema=schema,
        source_doc=None,
        llm_attempts=attempts,
        created_at=ctx.clock(),
    )
    ctx.store.save_snapshot(snapshot)
    _touch_manifest(ctx, manifest, status=RunStatus.COMPLETED, cursor=None)
    return snapshot


def run_stage2(
    ctx: RunContext,
    prev: Snapshot,
    curated: Corpus,
    mode: FeedbackMode,
    gate: Optional[ReviewGate] = None,
    start_iteration: int = 1,
) -> list[Snapshot]:
    """Refine the schema over the curated paper set, one paper per iteration."""
    if curated.role is not CorpusRole.CURATED:
        raise PipelineError(f"stage 2 expects a curated corpus, got {curated.role.value}")
    return _run_iterative_stage(ctx, prev, curated, StageId.REFINE, mode, gate, start_iteration)


def run_stage3(
    ctx: RunContext,
    prev: Snapshot,
    extended: Corpus,
    mode: FeedbackMode,
    gate: Optional[ReviewGate] = None,
    start_iteration: int = 1,
) -> list[Snapshot]:
    """Finalize the schema over the extended corpus."""
    if extended.role is not CorpusRole.EXTENDED:
        raise PipelineError(f"stage 3 expects an extended corpus, got {extended.role.value}")
    return _run_iterative_stage(ctx, prev, extended, StageId.FINALIZE, mode, gate, start_iteration)


def _call_model(ctx: RunContext, prompt: PromptPair):
    prompt = fit_to_budget(prompt, ctx.model.context_limit, ctx.model.completion_reserve, ctx.estimator)
    return complete_schema_with_repair(prompt, ctx.model, sleep=ctx.sleep)


def _previous_schema_for_ticket(ctx: RunContext, run_id: str, current_key) -> Snapshot:
    keys = ctx.store.list_snapshot_keys(run_id)
    if current_key in keys:
        idx = keys.index(current_key)
        prior = keys[idx - 1] if idx > 0 else current_key
    else:
        prior = keys[-1] if keys else current_key
    return ctx.store.load_snapshot(run_id, prior[0], prior[1])


def _run_iterative_stage(
    ctx: RunContext,
    prev: Snapshot,
    corpus: Corpus,
    stage: StageId,
    mode: FeedbackMode,
    gate: Optional[ReviewGate],
    start_iteration: int,
) -> list[Snapshot]:
    run_id = prev.run_id
    manifest = _load_or_create_manifest(ctx, run_id, mode)
    manifest.feedback_mode = mode
    manifest.corpus_digests[corpus.role.value] = corpus_digest(corpus)
    if corpus.docs:
        manifest.corpus_dirs[corpus.role.value] = str(corpus.docs[0].origin.parent)
    _touch_manifest(ctx, manifest, status=RunStatus.RUNNING, error=None,
                    cursor=(stage.value, start_iteration))

    render = render_refine if stage is StageId.REFINE else render_finalize
    working = prev
    if start_iteration > 1:
        working = ctx.store.load_snapshot(run_id, stage, start_iteration - 1)

    snapshots: list[Snapshot] = []
    for i, doc in enumerate(corpus.docs, start=1):
        if i < start_iteration:
            continue
        _touch_manifest(ctx, manifest, cursor=(stage.value, i))

        feedback = ctx.store.load_iteration_feedback(run_id, stage, i)
        if feedback is None and mode.gate_open(i):
            if gate is None:
                raise PipelineError(
                    f"feedback mode {mode.channel.value}/{mode.cadence.value} needs a review gate",
                    run_id, stage, i,
                )
            previous = _previous_schema_for_ticket(
                ctx, run_id, (working.stage, working.iteration)
            ).schema
            ticket = ReviewTicket(
                run_id=run_id,
                stage=stage,
                iteration=i,
                current=working.schema,
                previous=previous,
                diff=diff(previous, working.schema),
                duplicates=tuple(find_duplicates(working.schema, ctx.dup_threshold)),
                source_doc=doc.id,
            )
            ctx.store.save_pending_ticket(ticket)
            _touch_manifest(ctx, manifest, status=RunStatus.AWAITING_FEEDBACK)
            # A GateInterrupted here propagates with the run still parked
            # as AwaitingFeedback; resume() re-issues the same ticket.
            feedback = gate.await_feedback(ticket)
            try:
                validate_feedback_channel(mode, feedback)
            except FeedbackChannelMismatch as exc:
                _touch_manifest(ctx, manifest, status=RunStatus.FAILED, error=str(exc))
                raise
            ctx.store.clear_pending_ticket(run_id)
            _touch_manifest(ctx, manifest, status=RunStatus.RUNNING)

        # An expert-edited schema replaces the working schema outright.
        prompt_schema = working.schema
        if feedback is not None and feedback.edited_schema is not None:
            prompt_schema = feedback.edited_schema

        prompt = render(prompt_schema, doc.body, feedback, ctx.templates, ctx.estimator)
        try:
            schema, attempts, _ = _call_model(ctx, prompt)
        except (GatewayError, SchemaError) as exc:
            _touch_manifest(ctx, manifest, status=RunStatus.FAILED, error=str(exc),
                            cursor=(stage.value, i))
            raise PipelineError(str(exc), run_id, stage, i) from exc

        snapshot = Snapshot(
            run_id=run_id,
            stage=stage,
            iteration=i,
            schema=schema,
            source_doc=doc.id,
            feedback_applied=feedback,
            llm_attempts=attempts,
            created_at=ctx.clock(),
        )
        ctx.store.save_snapshot(snapshot)
        snapshots.append(snapshot)
        working = snapshot

    _touch_manifest(ctx, manifest, status=RunStatus.COMPLETED, cursor=None)
    return snapshots


# ---------------------------------------------------------------------------
# Experiment matrix


def enumerate_experiments() -> tuple[FeedbackMode, ...]:
    """The seven feedback protocols, in stable order 1a,1b,2a,2b,3a,3b,4."""
    first, every = Cadence.FIRST_ITERATION_ONLY, Cadence.EVERY_ITERATION
    return (
        FeedbackMode(FeedbackChannel.DESCRIPTIVE, first),
        FeedbackMode(FeedbackChannel.DESCRIPTIVE, every),
        FeedbackMode(FeedbackChannel.EDITED, first),
        FeedbackMode(FeedbackChannel.EDITED, every),
        FeedbackMode(FeedbackChannel.COMBINED, first),
        FeedbackMode(FeedbackChannel.COMBINED, every),
        NO_FEEDBACK,
    )


def experiment_label(mode: FeedbackMode) -> str:
    if mode.channel is FeedbackChannel.NONE:
        return "4"
    number = {
        FeedbackChannel.DESCRIPTIVE: "1",
        FeedbackChannel.EDITED: "2",
        FeedbackChannel.COMBINED: "3",
    }[mode.channel]
    variant = "a" if mode.cadence is Cadence.FIRST_ITERATION_ONLY else "b"
    return number + variant


# ---------------------------------------------------------------------------
# Resume


def resume(
    ctx: RunContext,
    run_id: str,
    gate: Optional[ReviewGate] = None,
) -> list[Snapshot]:
    """Continue a Running/AwaitingFeedback/Failed run from its cursor.

    Corpora are reloaded from the directories recorded in the manifest and
    their digests re-validated; an AwaitingFeedback run re-issues the same
    ticket. Resuming a Completed run is a no-op returning [].
    """
    manifest = ctx.store.load_manifest(run_id)
    if manifest.status is RunStatus.COMPLETED:
        return []
    if manifest.cursor is None:
        raise PipelineError(f"run {run_id} has no cursor to resume from", run_id)
    stage = StageId(manifest.cursor[0])
    iteration = manifest.cursor[1]

    if stage is StageId.GENERATE:
        spec = _reload_validated(ctx, manifest, CorpusRole.SPECIFICATION)
        return [run_stage1(ctx, spec, run_id=run_id, mode=manifest.feedback_mode)]

    role = _STAGE_ROLE[stage]
    corpus = _reload_validated(ctx, manifest, role)
    if iteration > 1:
        prev = ctx.store.load_snapshot(run_id, stage, iteration - 1)
    else:
        prev = _last_snapshot_before_stage(ctx, run_id, stage)
    runner = run_stage2 if stage is StageId.REFINE else run_stage3
    return runner(ctx, prev, corpus, manifest.feedback_mode, gate, start_iteration=iteration)


def _reload_validated(ctx: RunContext, manifest: RunManifest, role: CorpusRole) -> Corpus:
    directory = manifest.corpus_dirs.get(role.value)
    if directory is None:
        raise PipelineError(f"manifest records no {role.value} corpus directory", manifest.run_id)
    corpus = load_corpus(directory, role, ctx.estimator)
    recorded = manifest.corpus_digests.get(role.value)
    if recorded is not None and corpus_digest(corpus) != recorded:
        raise DigestMismatch(
            f"{role.value} corpus at {directory} changed since the run started"
        )
    return corpus


def _last_snapshot_before_stage(ctx: RunContext, run_id: str, stage: StageId) -> Snapshot:
    keys = [k for k in ctx.store.list_snapshot_keys(run_id) if k[0] is not stage]
    if not keys:
        raise PipelineError(f"run {run_id} has no snapshot to resume from", run_id)
    last_stage, last_iter = keys[-1]
    return ctx.store.load_snapshot(run_id, last_stage, last_iter)
