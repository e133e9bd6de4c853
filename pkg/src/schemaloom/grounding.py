"""Ground schema properties to ontology terms via a lookup-service API.

Four steps per property: preprocess the name into a query, search the
ontology lookup service across resource kinds, drop candidates without
descriptions, then rank the rest by embedding similarity between the query
and each candidate description. Per-property failures are isolated: one
unreachable lookup marks that entry as errored without aborting the run.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import requests

from schemaloom import SchemaloomError
from schemaloom.embeddings import EmbeddingClient, EmbeddingError, cosine
from schemaloom.model import SchemaDoc, iter_nodes


class GroundingError(SchemaloomError):
    pass


class OlsUnreachable(GroundingError):
    pass


class OlsProtocolError(GroundingError):
    pass


class ResourceKind(Enum):
    CLASS = "class"
    PROPERTY = "property"
    INDIVIDUAL = "individual"
    ONTOLOGY = "ontology"


DEFAULT_KINDS = (
    ResourceKind.CLASS,
    ResourceKind.PROPERTY,
    ResourceKind.INDIVIDUAL,
    ResourceKind.ONTOLOGY,
)

DEFAULT_TOP_K = 5


@dataclass(frozen=True)
class GroundingCandidate:
    iri: str
    label: str
    description: str
    source_ontology: str
    resource_kind: ResourceKind
    score: Optional[float] = None

    def to_json_dict(self) -> dict:
        return {
            "iri": self.iri,
            "label": self.label,
            "description": self.description,
            "source_ontology": self.source_ontology,
            "resource_kind": self.resource_kind.value,
            "score": self.score,
        }


@dataclass(frozen=True)
class OntologyAllowList:
    """Ontology ids eligible for grounding; matching is case-insensitive."""

    ids: frozenset[str]

    def __post_init__(self):
        if not self.ids:
            raise ValueError("allow-list must not be empty when enabled")
        object.__setattr__(self, "ids", frozenset(i.lower() for i in self.ids))

    def allows(self, ontology_id: str) -> bool:
        return ontology_id.lower() in self.ids

    @classmethod
    def from_file(cls, path: Path) -> "OntologyAllowList":
        """One ontology id per line; '#' starts a comment."""
        ids = set()
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            entry = line.split("#", 1)[0].strip()
            if entry:
                ids.add(entry)
        return cls(ids=frozenset(ids))


class OlsClient:
    """Minimal lookup-service search client (v2-style /search endpoint)."""

    def __init__(self, base_url: str, timeout: float = 30.0, rows: int = 20):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.rows = rows

    def search(
        self,
        query: str,
        kind: Optional[str] = None,
        ontologies: Optional[Sequence[str]] = None,
    ) -> list[dict]:
        params: dict[str, str] = {"q": query, "rows": str(self.rows)}
        if kind:
            params["type"] = kind
        if ontologies:
            params["ontology"] = ",".join(sorted(ontologies))
        try:
            resp = requests.get(f"{self.base_url}/search", params=params, timeout=self.timeout)
        except requests.RequestException as exc:
            raise OlsUnreachable(f"lookup service request failed: {exc}") from exc
        if resp.status_code != 200:
            raise OlsUnreachable(f"lookup service returned HTTP {resp.status_code}")
        try:
            data = resp.json()
        except ValueError as exc:
            raise OlsProtocolError(f"lookup service sent non-JSON: {exc}") from exc
        docs = data.get("response", {}).get("docs") if isinstance(data.get("response"), dict) else None
        if docs is None:
            docs = data.get("docs")
        if not isinstance(docs, list):
            raise OlsProtocolError("lookup service response has no docs list")
        return docs


@dataclass
class GroundingConfig:
    ols: OlsClient
    embedder: EmbeddingClient
    kinds: tuple[ResourceKind, ...] = DEFAULT_KINDS
    allow: Optional[OntologyAllowList] = None
    top_k: int = DEFAULT_TOP_K
    enrich_query_with_description: bool = True


# ---------------------------------------------------------------------------
# The four grounding steps

_CAMEL_LOWER_UPPER = re.compile(r"(?<=[a-z0-9])(?=[A-Z])")
_CAMEL_ACRONYM = re.compile(r"(?<=[A-Z])(?=[A-Z][a-z])")


def preprocess_term(property_name: str) -> str:
    """Property name -> search query: underscores to spaces, camelCase split,
    lowercased, whitespace collapsed."""
    if not property_name or not property_name.strip():
        raise ValueError("property name is empty")
    s = property_name.replace("_", " ")
    s = _CAMEL_ACRONYM.sub(" ", _CAMEL_LOWER_UPPER.sub(" ", s))
    return " ".join(s.lower().split())


def search(
    query: str,
    kinds: Sequence[ResourceKind],
    allow: Optional[OntologyAllowList],
    svc: OlsClient,
) -> list[GroundingCandidate]:
    """One lookup call per resource kind; allow-list filtering applied both
    as a request parameter and client-side. Duplicate IRIs keep their first
    (kind-ordered) occurrence."""
    if not query:
        raise ValueError("query is empty")
    ontologies = sorted(allow.ids) if allow is not None else None
    seen: dict[str, GroundingCandidate] = {}
    for kind in kinds:
        for doc in svc.search(query, kind=kind.value, ontologies=ontologies):
            cand = _candidate_from_doc(doc, kind)
            if cand is None:
                continue
            if allow is not None and not allow.allows(cand.source_ontology):
                continue
            seen.setdefault(cand.iri, cand)
    return list(seen.values())


def _candidate_from_doc(doc: dict, kind: ResourceKind) -> Optional[GroundingCandidate]:
    iri = doc.get("iri")
    label = doc.get("label")
    if not isinstance(iri, str) or not isinstance(label, str):
        return None
    desc = doc.get("description")
    if isinstance(desc, list):
        desc = desc[0] if desc and isinstance(desc[0], str) else ""
    if not isinstance(desc, str):
        desc = ""
    ontology = doc.get("ontology_name")
    if not isinstance(ontology, str):
        ontology = ""
    return GroundingCandidate(
        iri=iri,
        label=label,
        description=desc,
        source_ontology=ontology,
        resource_kind=kind,
    )


def validate(cands: Sequence[GroundingCandidate]) -> list[GroundingCandidate]:
    """Keep only candidates with a non-empty description (interpretability)."""
    return [c for c in cands if c.description and c.description.strip()]


def rank(
    query: str,
    cands: Sequence[GroundingCandidate],
    embedder: EmbeddingClient,
    k: int,
) -> list[GroundingCandidate]:
    """Top-k candidates by cosine(query embedding, description embedding).

    Ties break on (label, iri) so ranking is deterministic.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if not cands:
        return []
    vectors = embedder.embed([query] + [c.description for c in cands])
    query_vec = vectors[0]
    scored = [
        replace(cand, score=cosine(query_vec, vec))
        for cand, vec in zip(cands, vectors[1:])
    ]
    scored.sort(key=lambda c: (-c.score, c.label, c.iri))
    return scored[:k]


# ---------------------------------------------------------------------------
# Whole-schema grounding


@dataclass(frozen=True)
class GroundingEntry:
    path: str
    query: str
    status: str  # "grounded" | "no-match" | "error"
    candidates: tuple[GroundingCandidate, ...] = ()
    error: Optional[str] = None

    def to_json_dict(self) -> dict:
        return {
            "path": self.path,
            "query": self.query,
            "status": self.status,
            "candidates": [c.to_json_dict() for c in self.candidates],
            "error": self.error,
        }


@dataclass(frozen=True)
class GroundingReport:
    entries: dict[str, GroundingEntry]

    def to_json_dict(self) -> dict:
        return {"entries": {path: e.to_json_dict() for path, e in sorted(self.entries.items())}}


def ground_schema(doc: SchemaDoc, cfg: GroundingConfig) -> GroundingReport:
    """Run preprocess -> search -> validate -> rank for every schema node.

    Array-hop entries query on the nearest named ancestor segment. A failing
    lookup or embedder yields an error entry for that path only.
    """
    entries: dict[str, GroundingEntry] = {}
    for path, node in iter_nodes(doc):
        rendered = path.render()
        name = path.last_named()
        if name is None:
            continue
        query = preprocess_term(name)
        try:
            candidates = validate(search(query, cfg.kinds, cfg.allow, cfg.ols))
            if not candidates:
                entries[rendered] = GroundingEntry(path=rendered, query=query, status="no-match")
                continue
            rank_query = query
            if cfg.enrich_query_with_description and node.description:
                rank_query = f"{query}: {node.description}"
            top = rank(rank_query, candidates, cfg.embedder, cfg.top_k)
            entries[rendered] = GroundingEntry(
                path=rendered, query=query, status="grounded", candidates=tuple(top)
            )
        except (GroundingError, EmbeddingError) as exc:
            entries[rendered] = GroundingEntry(
                path=rendered, query=query, status="error", error=str(exc)
            )
    return GroundingReport(entries=entries)
