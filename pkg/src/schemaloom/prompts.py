"""Render stage prompts from editable templates and fit them to a context budget.

Each stage (generate / refine / finalize) has a template file with five
sections: [ROLE], [TASK], [INPUT-FORMAT], [OUTPUT-FORMAT], [USER]. The first
four become the system prompt; [USER] is a layout whose ``{SlotName}``
placeholders are filled per call. A paragraph whose placeholder is absent
(optional expert feedback) is dropped entirely, header included.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Callable, Optional, TYPE_CHECKING

from schemaloom import SchemaloomError
from schemaloom.model import SchemaDoc, serialize_canonical

if TYPE_CHECKING:
    from schemaloom.pipeline import Feedback


class PromptError(SchemaloomError):
    pass


class EmptyInput(PromptError):
    pass


class TemplateError(PromptError):
    pass


class BudgetImpossible(PromptError):
    pass


class StageId(Enum):
    GENERATE = "Generate"
    REFINE = "Refine"
    FINALIZE = "Finalize"


SLOT_DOMAIN_SPEC = "DomainSpecification"
SLOT_PREV_SCHEMA = "PrevSchema"
SLOT_SCI_PAPER = "SciPaper"
SLOT_FEEDBACK = "ExpertFeedback"

_STAGE_SLOTS = {
    StageId.GENERATE: {"required": {SLOT_DOMAIN_SPEC}, "optional": set()},
    StageId.REFINE: {"required": {SLOT_PREV_SCHEMA, SLOT_SCI_PAPER}, "optional": {SLOT_FEEDBACK}},
    StageId.FINALIZE: {"required": {SLOT_PREV_SCHEMA, SLOT_SCI_PAPER}, "optional": {SLOT_FEEDBACK}},
}

TRUNCATION_NOTICE = "[paper text truncated to fit the model context budget]"

TokenEstimator = Callable[[str], int]


def estimate_tokens(text: str) -> int:
    """Default token estimate: one token per four characters, rounded up."""
    return math.ceil(len(text) / 4)


@dataclass(frozen=True)
class StageTemplate:
    stage: StageId
    role: str
    task: str
    input_format: str
    output_format: str
    user_layout: str


@dataclass(frozen=True)
class TemplateSet:
    generate: StageTemplate
    refine: StageTemplate
    finalize: StageTemplate

    def for_stage(self, stage: StageId) -> StageTemplate:
        return {
            StageId.GENERATE: self.generate,
            StageId.REFINE: self.refine,
            StageId.FINALIZE: self.finalize,
        }[stage]


@dataclass(frozen=True)
class PromptPair:
    """A rendered system+user prompt for one stage call.

    ``slots`` and ``layout`` retain the fill inputs so fit_to_budget can
    re-render the user prompt with a shortened paper slot.
    """

    system: str
    user: str
    stage: StageId
    est_tokens: int
    slots: dict[str, str]
    layout: str


# ---------------------------------------------------------------------------
# Template parsing

_MARKERS = ["[ROLE]", "[TASK]", "[INPUT-FORMAT]", "[OUTPUT-FORMAT]", "[USER]"]
_SLOT_RE = re.compile(r"\{([A-Za-z]+)\}")
_FILENAMES = {StageId.GENERATE: "generate.txt", StageId.REFINE: "refine.txt", StageId.FINALIZE: "finalize.txt"}


def parse_template(text: str, stage: StageId) -> StageTemplate:
    """Parse one template file; text before the first marker is ignored."""
    positions = []
    for marker in _MARKERS:
        idx = text.find(marker)
        if idx < 0:
            raise TemplateError(f"{stage.value} template is missing the {marker} marker")
        positions.append((idx, marker))
    if positions != sorted(positions):
        raise TemplateError(f"{stage.value} template markers out of order")

    sections = {}
    for (start, marker), nxt in zip(positions, positions[1:] + [(len(text), None)]):
        sections[marker] = text[start + len(marker):nxt[0]].strip()

    layout = sections["[USER]"]
    referenced = set(_SLOT_RE.findall(layout))
    spec = _STAGE_SLOTS[stage]
    unknown = referenced - spec["required"] - spec["optional"]
    if unknown:
        raise TemplateError(f"{stage.value} template references unknown slots: {sorted(unknown)}")
    missing = spec["required"] - referenced
    if missing:
        raise TemplateError(f"{stage.value} template must reference slots: {sorted(missing)}")

    return StageTemplate(
        stage=stage,
        role=sections["[ROLE]"],
        task=sections["[TASK]"],
        input_format=sections["[INPUT-FORMAT]"],
        output_format=sections["[OUTPUT-FORMAT]"],
        user_layout=layout,
    )


def load_templates(directory: Path) -> TemplateSet:
    parsed = {}
    for stage, filename in _FILENAMES.items():
        path = Path(directory) / filename
        if not path.is_file():
            raise TemplateError(f"missing template file {path}")
        parsed[stage] = parse_template(path.read_text(encoding="utf-8"), stage)
    return TemplateSet(
        generate=parsed[StageId.GENERATE],
        refine=parsed[StageId.REFINE],
        finalize=parsed[StageId.FINALIZE],
    )


def default_templates() -> TemplateSet:
    base = resources.files("schemaloom").joinpath("templates")
    parsed = {
        stage: parse_template(base.joinpath(name).read_text(encoding="utf-8"), stage)
        for stage, name in _FILENAMES.items()
    }
    return TemplateSet(
        generate=parsed[StageId.GENERATE],
        refine=parsed[StageId.REFINE],
        finalize=parsed[StageId.FINALIZE],
    )


def write_default_templates(directory: Path) -> list[Path]:
    """Copy packaged template files into ``directory`` for user editing."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    base = resources.files("schemaloom").joinpath("templates")
    written = []
    for name in _FILENAMES.values():
        target = directory / name
        if not target.exists():
            target.write_text(base.joinpath(name).read_text(encoding="utf-8"), encoding="utf-8")
            written.append(target)
    return written


# ---------------------------------------------------------------------------
# Rendering

_PARA_SPLIT_RE = re.compile(r"\n[ \t]*\n")


def _render_system(t: StageTemplate) -> str:
    sections = [
        ("Role", t.role),
        ("Task", t.task),
        ("Input format", t.input_format),
        ("Output format", t.output_format),
    ]
    return "\n\n".join(f"{label}: {body}" for label, body in sections)


def _render_user(layout: str, slots: dict[str, str]) -> str:
    """Substitute slots paragraph-wise; paragraphs with absent slots vanish."""
    rendered = []
    for para in _PARA_SPLIT_RE.split(layout):
        refs = _SLOT_RE.findall(para)
        if any(slots.get(name) is None for name in refs):
            continue
        for name in refs:
            para = para.replace("{%s}" % name, slots[name])
        rendered.append(para)
    return "\n\n".join(rendered)


def _feedback_text(feedback: "Feedback") -> str:
    parts = []
    if feedback.descriptive:
        parts.append(feedback.descriptive)
    if feedback.edited_schema is not None:
        parts.append("Edited schema:\n" + serialize_canonical(feedback.edited_schema))
    return "\n\n".join(parts)


def _build_pair(
    template: StageTemplate, slots: dict[str, str], estimator: TokenEstimator
) -> PromptPair:
    system = _render_system(template)
    user = _render_user(template.user_layout, slots)
    return PromptPair(
        system=system,
        user=user,
        stage=template.stage,
        est_tokens=estimator(system) + estimator(user),
        slots=slots,
        layout=template.user_layout,
    )


def render_generate(
    spec_doc: str, templates: TemplateSet, estimator: TokenEstimator = estimate_tokens
) -> PromptPair:
    if not spec_doc or not spec_doc.strip():
        raise EmptyInput("domain specification text is empty")
    return _build_pair(templates.generate, {SLOT_DOMAIN_SPEC: spec_doc}, estimator)


def render_refine(
    prev: SchemaDoc,
    paper: str,
    feedback: Optional["Feedback"],
    templates: TemplateSet,
    estimator: TokenEstimator = estimate_tokens,
) -> PromptPair:
    return _render_iterative(templates.refine, prev, paper, feedback, estimator)


def render_finalize(
    prev: SchemaDoc,
    paper: str,
    feedback: Optional["Feedback"],
    templates: TemplateSet,
    estimator: TokenEstimator = estimate_tokens,
) -> PromptPair:
    return _render_iterative(templates.finalize, prev, paper, feedback, estimator)


def _render_iterative(template, prev, paper, feedback, estimator) -> PromptPair:
    if not paper or not paper.strip():
        raise EmptyInput("paper text is empty")
    slots = {
        SLOT_PREV_SCHEMA: serialize_canonical(prev),
        SLOT_SCI_PAPER: paper,
        SLOT_FEEDBACK: _feedback_text(feedback) if feedback is not None else None,
    }
    return _build_pair(template, slots, estimator)


# ---------------------------------------------------------------------------
# Budget fitting


def fit_to_budget(
    p: PromptPair,
    context_limit: int,
    completion_reserve: int,
    estimator: TokenEstimator = estimate_tokens,
) -> PromptPair:
    """Shrink the paper slot until the prompt fits the context budget.

    Only the SciPaper slot is ever shortened, tail-first at paragraph
    boundaries, with a truncation notice appended; the system prompt and the
    previous schema are never touched. Idempotent: a fitting prompt is
    returned unchanged.
    """
    if not (context_limit > completion_reserve > 0):
        raise ValueError("need context_limit > completion_reserve > 0")
    budget = context_limit - completion_reserve
    if p.est_tokens <= budget:
        return p
    paper = p.slots.get(SLOT_SCI_PAPER)
    if paper is None:
        raise BudgetImpossible(
            f"prompt estimates {p.est_tokens} tokens against a budget of {budget} "
            "and has no paper slot to shorten"
        )

    paragraphs = _PARA_SPLIT_RE.split(paper)

    def fitted(keep: int) -> Optional[PromptPair]:
        slot = "\n\n".join(paragraphs[:keep]) + "\n" + TRUNCATION_NOTICE
        slots = dict(p.slots)
        slots[SLOT_SCI_PAPER] = slot
        user = _render_user(p.layout, slots)
        est = estimator(p.system) + estimator(user)
        if est > budget:
            return None
        return replace(p, user=user, est_tokens=est, slots=slots)

    # est is monotone in the paragraph count: binary search the largest fit.
    lo, hi = 1, len(paragraphs)
    if fitted(lo) is None:
        raise BudgetImpossible(
            f"prompt exceeds the {budget}-token budget even with the paper "
            "reduced to one paragraph"
        )
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if fitted(mid) is None:
            hi = mid - 1
        else:
            lo = mid
    return fitted(lo)
