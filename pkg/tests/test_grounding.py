import urllib.parse

import pytest

from schemaloom.grounding import (
    GroundingCandidate,
    GroundingConfig,
    OlsClient,
    OlsUnreachable,
    OntologyAllowList,
    ResourceKind,
    ground_schema,
    preprocess_term,
    rank,
    search,
    validate,
)
from schemaloom.model import flatten, parse_schema

from helpers import MockEndpoint
from oracles import PlannedCosineEmbedder, HashEmbedder


def ols_doc(iri, label, description, ontology):
    doc = {"iri": iri, "label": label, "ontology_name": ontology}
    if description is not None:
        doc["description"] = [description] if description else []
    return doc


def ols_body(docs):
    return {"status": 200, "body": {"response": {"docs": docs}}}


class TestPreprocess:
    def test_underscores(self):
        assert preprocess_term("film_thickness") == "film thickness"

    def test_camel_case(self):
        assert preprocess_term("growthPerCycle") == "growth per cycle"

    def test_identity(self):
        assert preprocess_term("temperature") == "temperature"

    def test_collapse_and_lower(self):
        assert preprocess_term("Pulse__Time") == "pulse time"

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            preprocess_term("  ")


THREE_DOCS = [
    ols_doc("iri:1", "thickness", "film thickness measured", "chmo"),
    ols_doc("iri:2", "thickness", "layer depth", "obi"),
    ols_doc("iri:3", "thickness", "a coating measure", "mystery"),
]


class TestSearch:
    def test_allow_list_filters(self):
        with MockEndpoint([ols_body(THREE_DOCS)]) as mock:
            svc = OlsClient(mock.base_url)
            allow = OntologyAllowList(frozenset({"chmo", "obi"}))
            got = search("thickness", [ResourceKind.CLASS], allow, svc)
        assert {c.iri for c in got} == {"iri:1", "iri:2"}

    def test_empty_results_not_an_error(self):
        with MockEndpoint([ols_body([])]) as mock:
            got = search("thickness", [ResourceKind.CLASS], None, OlsClient(mock.base_url))
        assert got == []

    def test_kind_restriction_visible_in_request(self):
        with MockEndpoint([ols_body([])]) as mock:
            search("film", [ResourceKind.CLASS], None, OlsClient(mock.base_url))
            assert len(mock.request_log) == 1
            params = urllib.parse.parse_qs(mock.request_log[0]["query"])
        assert params["type"] == ["class"]
        assert params["q"] == ["film"]

    def test_one_call_per_kind(self):
        with MockEndpoint([ols_body([])]) as mock:
            search("film", [ResourceKind.CLASS, ResourceKind.PROPERTY], None, OlsClient(mock.base_url))
            kinds = [urllib.parse.parse_qs(r["query"])["type"][0] for r in mock.request_log]
        assert kinds == ["class", "property"]

    def test_allow_list_forwarded_to_service(self):
        with MockEndpoint([ols_body([])]) as mock:
            allow = OntologyAllowList(frozenset({"b-ont", "a-ont"}))
            search("film", [ResourceKind.CLASS], allow, OlsClient(mock.base_url))
            params = urllib.parse.parse_qs(mock.request_log[0]["query"])
        assert params["ontology"] == ["a-ont,b-ont"]

    def test_monotone_under_allow_list_shrink(self):
        big = OntologyAllowList(frozenset({"chmo", "obi", "mystery"}))
        small = OntologyAllowList(frozenset({"chmo"}))
        with MockEndpoint([ols_body(THREE_DOCS)]) as mock:
            wide = search("thickness", [ResourceKind.CLASS], big, OlsClient(mock.base_url))
        with MockEndpoint([ols_body(THREE_DOCS)]) as mock:
            narrow = search("thickness", [ResourceKind.CLASS], small, OlsClient(mock.base_url))
        assert {c.iri for c in narrow} <= {c.iri for c in wide}

    def test_unreachable(self):
        with pytest.raises(OlsUnreachable):
            search("x", [ResourceKind.CLASS], None, OlsClient("http://127.0.0.1:1", timeout=0.2))


def cand(label, description, iri=None, ontology="chmo"):
    return GroundingCandidate(
        iri=iri or f"iri:{label}",
        label=label,
        description=description,
        source_ontology=ontology,
        resource_kind=ResourceKind.CLASS,
    )


class TestValidate:
    def test_drops_missing_descriptions(self):
        cands = [cand("a", "described"), cand("b", ""), cand("c", "   ")]
        assert [c.label for c in validate(cands)] == ["a"]

    def test_all_dropped(self):
        assert validate([cand("a", ""), cand("b", " ")]) == []

    def test_identity_when_all_described(self):
        cands = [cand("a", "x"), cand("b", "y")]
        assert validate(cands) == cands

    def test_idempotent(self):
        cands = [cand("a", "x"), cand("b", "")]
        once = validate(cands)
        assert validate(once) == once


class TestRank:
    def test_hand_computed_cosine_ordering(self):
        cands = [cand("mid", "d-mid"), cand("low", "d-low"), cand("high", "d-high")]
        emb = PlannedCosineEmbedder("query", {"d-mid": 0.5, "d-low": 0.2, "d-high": 0.9})
        top = rank("query", cands, emb, k=2)
        assert [c.label for c in top] == ["high", "mid"]
        assert top[0].score == pytest.approx(0.9)
        assert top[1].score == pytest.approx(0.5)

    def test_k_larger_than_pool(self):
        cands = [cand("a", "da"), cand("b", "db")]
        emb = PlannedCosineEmbedder("q", {"da": 0.3, "db": 0.7})
        top = rank("q", cands, emb, k=10)
        assert [c.label for c in top] == ["b", "a"]

    def test_tie_breaks_on_label(self):
        cands = [cand("zeta", "same"), cand("alpha", "same")]
        emb = PlannedCosineEmbedder("q", {"same": 0.5})
        top = rank("q", cands, emb, k=2)
        assert [c.label for c in top] == ["alpha", "zeta"]

    def test_scores_non_increasing(self):
        cands = [cand(f"c{i}", f"d{i}") for i in range(5)]
        emb = PlannedCosineEmbedder("q", {f"d{i}": 0.1 * i for i in range(5)})
        top = rank("q", cands, emb, k=5)
        scores = [c.score for c in top]
        assert scores == sorted(scores, reverse=True)

    def test_invalid_k(self):
        with pytest.raises(ValueError):
            rank("q", [], PlannedCosineEmbedder("q", {}), k=0)


SCHEMA = parse_schema(
    '{"type":"object","properties":{'
    '"temperature":{"type":"number","description":"reactor temperature"},'
    '"pressure":{"type":"number","description":"chamber pressure"},'
    '"film_thickness":{"type":"number","description":"layer thickness"}}}'
)


def grounding_config(mock, allow=None, **kw):
    from schemaloom.embeddings import EmbeddingClient

    cfg = GroundingConfig(
        ols=OlsClient(mock.base_url),
        embedder=HashEmbedder(),
        kinds=(ResourceKind.CLASS,),
        allow=allow,
        **kw,
    )
    return cfg


class TestGroundSchema:
    def test_empty_schema(self):
        with MockEndpoint([ols_body([])]) as mock:
            report = ground_schema(parse_schema('{"type":"object","properties":{}}'), grounding_config(mock))
        assert report.entries == {}

    def test_report_covers_flatten_bijectively(self):
        with MockEndpoint([ols_body([ols_doc("iri:x", "x", "a description", "chmo")])]) as mock:
            report = ground_schema(SCHEMA, grounding_config(mock))
        assert set(report.entries) == {str(p) for p, _, _ in flatten(SCHEMA)}

    def test_no_match_marker(self):
        with MockEndpoint([ols_body([ols_doc("iri:x", "x", "", "chmo")])]) as mock:
            report = ground_schema(SCHEMA, grounding_config(mock))
        assert all(e.status == "no-match" for e in report.entries.values())

    def test_per_leaf_failure_isolation(self):
        def handler(entry):
            params = urllib.parse.parse_qs(entry["query"])
            if params["q"] == ["pressure"]:
                return {"status": 500, "body": {"error": "down"}}
            return ols_body([ols_doc("iri:x", "x", "a description", "chmo")])

        with MockEndpoint(handler=handler) as mock:
            report = ground_schema(SCHEMA, grounding_config(mock))
        statuses = {path: e.status for path, e in report.entries.items()}
        assert statuses["pressure"] == "error"
        assert statuses["temperature"] == "grounded"
        assert statuses["film_thickness"] == "grounded"
        assert report.entries["pressure"].error

    def test_query_uses_preprocessed_name(self):
        with MockEndpoint([ols_body([])]) as mock:
            report = ground_schema(SCHEMA, grounding_config(mock))
        assert report.entries["film_thickness"].query == "film thickness"

    def test_array_hop_queries_nearest_named_segment(self):
        doc = parse_schema(
            '{"type":"object","properties":{"steps":{"type":"array","items":{"type":"string"}}}}'
        )
        with MockEndpoint([ols_body([])]) as mock:
            report = ground_schema(doc, grounding_config(mock))
        assert report.entries["steps.[]"].query == "steps"

    def test_top_k_respected(self):
        docs = [ols_doc(f"iri:{i}", f"c{i}", f"desc {i}", "chmo") for i in range(8)]
        with MockEndpoint([ols_body(docs)]) as mock:
            report = ground_schema(SCHEMA, grounding_config(mock, top_k=3))
        for e in report.entries.values():
            assert e.status == "grounded"
            assert len(e.candidates) == 3


class TestAllowListFile:
    def test_parse(self, tmp_path):
        listing = tmp_path / "ontologies.txt"
        listing.write_text("# curated pool\nchmo\nobi  # units\n\nqudt\n")
        allow = OntologyAllowList.from_file(listing)
        assert allow.ids == frozenset({"chmo", "obi", "qudt"})

    def test_empty_rejected(self, tmp_path):
        listing = tmp_path / "ontologies.txt"
        listing.write_text("# nothing\n")
        with pytest.raises(ValueError):
            OntologyAllowList.from_file(listing)

    def test_case_insensitive(self):
        allow = OntologyAllowList(frozenset({"ChMO"}))
        assert allow.allows("CHMO")
        assert allow.allows("chmo")
