"""Schema variance metrics: LCS-based F1, n-gram precision, embedding F1.

Canonical schema texts are tokenized once, then compared pairwise; the
pairwise report mirrors the usual cross-model comparison table (one block per
stage, a three-metric column group per reference model, diagonal omitted).

The LCS inner loop is the only O(n*m) hot spot; a compiled kernel is used
when available and a pure-Python fallback otherwise (see KERNEL_BACKEND).
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Optional, Sequence

import numpy as np

from schemaloom.embeddings import cosine
from schemaloom.model import SchemaDoc, flatten, serialize_canonical

try:
    from schemaloom._lcs import lcs_length_ids as _lcs_length_ids
    KERNEL_BACKEND = "compiled"
except ImportError:  # extension not built; pure Python is drop-in
    from schemaloom._lcs_py import lcs_length_ids as _lcs_length_ids
    KERNEL_BACKEND = "python"

TokenSeq = list[str]

_PUNCT_TABLE = str.maketrans({c: " " for c in '{}[]",:'})
_CAMEL_LOWER_UPPER = re.compile(r"(?<=[a-z0-9])(?=[A-Z])")
_CAMEL_ACRONYM = re.compile(r"(?<=[A-Z])(?=[A-Z][a-z])")


def tokenize_schema(text: str) -> TokenSeq:
    """Lowercased word tokens of schema text.

    Splits on whitespace and the structural punctuation {}[]",: (dropped),
    then splits snake_case and camelCase pieces into words.
    """
    tokens: TokenSeq = []
    for piece in text.translate(_PUNCT_TABLE).split():
        for part in piece.split("_"):
            if not part:
                continue
            part = _CAMEL_ACRONYM.sub(" ", _CAMEL_LOWER_UPPER.sub(" ", part))
            tokens.extend(w.lower() for w in part.split())
    return tokens


def lcs_length(cand: Sequence[str], ref: Sequence[str]) -> int:
    """LCS length between token sequences (dispatches to the active kernel)."""
    ids: dict[str, int] = {}
    for tok in cand:
        ids.setdefault(tok, len(ids))
    for tok in ref:
        ids.setdefault(tok, len(ids))
    a = np.fromiter((ids[t] for t in cand), dtype=np.int32, count=len(cand))
    b = np.fromiter((ids[t] for t in ref), dtype=np.int32, count=len(ref))
    return int(_lcs_length_ids(a, b))


def rouge_l(cand: Sequence[str], ref: Sequence[str]) -> float:
    """LCS F-measure; 0.0 when either side is empty or nothing is shared."""
    if not cand or not ref:
        return 0.0
    lcs = lcs_length(cand, ref)
    if lcs == 0:
        return 0.0
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    return 2 * precision * recall / (precision + recall)


def bleu(cand: Sequence[str], ref: Sequence[str], max_n: int = 4) -> float:
    """Sentence BLEU, candidate against one reference; directional.

    Modified n-gram precisions up to ``max_n`` with add-1 smoothing on zero
    counts for n >= 2, geometric mean, brevity penalty exp(1 - |ref|/|cand|)
    applied when the candidate is shorter. 0.0 when unigrams miss entirely.
    """
    if not cand:
        return 0.0
    log_sum = 0.0
    for n in range(1, max_n + 1):
        cand_grams = Counter(tuple(cand[i:i + n]) for i in range(len(cand) - n + 1))
        ref_grams = Counter(tuple(ref[i:i + n]) for i in range(len(ref) - n + 1))
        total = sum(cand_grams.values())
        matches = sum(min(count, ref_grams[g]) for g, count in cand_grams.items())
        if n == 1:
            if matches == 0:
                return 0.0
            p = matches / total
        elif matches == 0:
            p = 1.0 / (total + 1)
        else:
            p = matches / total
        log_sum += math.log(p)
    geo_mean = math.exp(log_sum / max_n)
    brevity = math.exp(1 - len(ref) / len(cand)) if len(cand) < len(ref) else 1.0
    return brevity * geo_mean


class EmbF1(NamedTuple):
    precision: float
    recall: float
    f1: float


class Embedder:
    """Anything with embed(list[str]) -> list of vectors works here."""

    def embed(self, texts: list[str]) -> list[np.ndarray]:  # pragma: no cover
        raise NotImplementedError


def emb_f1(cand: Sequence[str], ref: Sequence[str], embedder) -> EmbF1:
    """Greedy max-cosine token matching between two sequences.

    Precision averages, over candidate tokens, the best cosine against any
    reference token; recall is symmetric; F1 is their harmonic mean. Each
    distinct token is embedded once (contextless) via the embedder.
    """
    if not cand or not ref:
        return EmbF1(0.0, 0.0, 0.0)
    vocab = list(dict.fromkeys([*cand, *ref]))
    vectors = dict(zip(vocab, embedder.embed(vocab)))
    sim: dict[tuple[str, str], float] = {}

    def best(token: str, others: Sequence[str]) -> float:
        scores = []
        for other in others:
            key = (token, other) if token <= other else (other, token)
            if key not in sim:
                sim[key] = cosine(vectors[token], vectors[other])
            scores.append(sim[key])
        return max(scores)

    precision = sum(best(t, ref) for t in cand) / len(cand)
    recall = sum(best(t, cand) for t in ref) / len(ref)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return EmbF1(precision, recall, f1)


# ---------------------------------------------------------------------------
# Pairwise comparison reports


@dataclass(frozen=True)
class MetricCell:
    rouge_l: float
    bleu: float
    emb_f1: float


@dataclass(frozen=True)
class PairwiseReport:
    """All-pairs schema comparison for one stage.

    Cells are keyed (candidate model, reference model); the diagonal is
    absent. ROUGE-L and embedding F1 are symmetric by construction, BLEU is
    directional.
    """

    stage: str
    models: tuple[str, ...]
    cells: dict[tuple[str, str], MetricCell]

    def to_json_dict(self) -> dict:
        return {
            "stage": self.stage,
            "models": list(self.models),
            "cells": {
                f"{cand}|{ref}": {
                    "rouge_l": cell.rouge_l,
                    "bleu": cell.bleu,
                    "emb_f1": cell.emb_f1,
                }
                for (cand, ref), cell in sorted(self.cells.items())
            },
        }


def schema_comparison_text(doc: SchemaDoc, fields: str = "full") -> str:
    """Text a schema is scored on: canonical form, or description prose only."""
    if fields == "full":
        return serialize_canonical(doc)
    if fields == "descriptions":
        parts = [doc.root.description or ""]
        parts += [desc or "" for _, _, desc in flatten(doc)]
        return "\n".join(p for p in parts if p)
    raise ValueError(f"unknown fields mode {fields!r} (use 'full' or 'descriptions')")


def build_pairwise_report(
    schemas: Mapping[str, SchemaDoc],
    stage: str,
    embedder,
    fields: str = "full",
) -> PairwiseReport:
    """Compare every ordered model pair on their serialized schemas."""
    if len(schemas) < 2:
        raise ValueError("pairwise comparison needs at least two models")
    tokens = {
        model: tokenize_schema(schema_comparison_text(doc, fields))
        for model, doc in schemas.items()
    }
    models = tuple(schemas)
    cells = {}
    for cand in models:
        for ref in models:
            if cand == ref:
                continue
            cells[(cand, ref)] = MetricCell(
                rouge_l=rouge_l(tokens[cand], tokens[ref]),
                bleu=bleu(tokens[cand], tokens[ref]),
                emb_f1=emb_f1(tokens[cand], tokens[ref], embedder).f1,
            )
    return PairwiseReport(stage=stage, models=models, cells=cells)


_METRIC_LABELS = ("RougeL", "Bleu", "Emb-F1")


def render_report_text(reports: Sequence[PairwiseReport]) -> str:
    """Plain-text table: one block per stage, three metric columns per
    reference model, candidates as rows, diagonal omitted."""
    lines = []
    for report in reports:
        width = max(12, max(len(m) for m in report.models) + 2)
        group = len(_METRIC_LABELS) * 9
        lines.append(f"=== Stage: {report.stage} ===")
        header = " " * width + "".join(f"{m:^{group}}" for m in report.models)
        sub = " " * width + "".join(
            "".join(f"{label:>9}" for label in _METRIC_LABELS) for _ in report.models
        )
        lines.append(header.rstrip())
        lines.append(sub.rstrip())
        for cand in report.models:
            row = [f"{cand:<{width}}"]
            for ref in report.models:
                if cand == ref:
                    row.append("".join(f"{'-':>9}" for _ in _METRIC_LABELS))
                else:
                    cell = report.cells[(cand, ref)]
                    row.append(
                        f"{cell.rouge_l:>9.4f}{cell.bleu:>9.4f}{cell.emb_f1:>9.4f}"
                    )
            lines.append("".join(row).rstrip())
        lines.append("")
    return "\n".join(lines)
