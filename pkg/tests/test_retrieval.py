import math

import httpx
import pytest
from hypothesis import given, strategies as st

from chaingen.retrieval import (
    BuiltinEmbeddingBackend,
    Chunk,
    EmptyCatalog,
    ExpansionTable,
    ExternalEmbeddingBackend,
    ExternalRerankProvider,
    ProviderUnavailable,
    RetrievalCandidate,
    SingleLineOverflow,
    cosine,
    estimate_tokens,
    make_chunks,
    merge_signal_lists,
    rerank,
    retrieve_top_k,
    tokenize,
    validate_signals,
)
from chaingen.vss_catalog import Catalog, VssEntry

from conftest import SCENARIO


def _entry(path, kind="sensor", description=""):
    return VssEntry(path=path, kind=kind, description=description)


# --- builtin embedding -------------------------------------------------------

def test_tokenize_boundaries():
    assert tokenize("Vehicle.Body.Lights.Hazard") == ["vehicle", "body", "lights", "hazard"]
    assert tokenize("set_is_signaling(bool value)") == ["set", "is", "signaling", "bool", "value"]
    assert tokenize("camelCaseWord") == ["camel", "case", "word"]


def test_embed_empty_text_is_zero_vector():
    backend = BuiltinEmbeddingBackend()
    vec = backend.embed("")
    assert len(vec) == 256
    assert all(v == 0.0 for v in vec)


def test_embed_case_folding():
    backend = BuiltinEmbeddingBackend()
    assert backend.embed("hazard") == backend.embed("Hazard")


def test_embed_unit_norm():
    backend = BuiltinEmbeddingBackend()
    vec = backend.embed("hazard warning lights")
    assert abs(math.sqrt(sum(v * v for v in vec)) - 1.0) < 1e-9


def test_embed_dimension_matches_independent_fnv():
    # Independent FNV-1a 64 oracle, written out rather than imported.
    h = 0xCBF29CE484222325
    for byte in b"hazard":
        h = ((h ^ byte) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    expected_dim = h % 256
    vec = BuiltinEmbeddingBackend().embed("hazard")
    assert vec[expected_dim] == 1.0
    assert sum(1 for v in vec if v != 0.0) == 1


def test_embed_is_deterministic():
    a = BuiltinEmbeddingBackend().embed("pedestrian detection")
    b = BuiltinEmbeddingBackend().embed("pedestrian detection")
    assert a == b


def test_cosine_anchor_prefers_related_entry():
    backend = BuiltinEmbeddingBackend()
    query = backend.embed("hazard lights")
    related = backend.embed("Vehicle.Body.Lights.Hazard")
    unrelated = backend.embed("Vehicle.Powertrain.Engine.Speed")
    assert cosine(query, related) > cosine(query, unrelated)


# --- retrieve_top_k ----------------------------------------------------------

def test_retrieve_places_hazard_in_top_10(case_catalog):
    top = retrieve_top_k(SCENARIO, case_catalog, 10, BuiltinEmbeddingBackend())
    assert "Vehicle.Body.Lights.Hazard" in [c.entry.path for c in top]


def test_retrieve_similarities_non_increasing(case_catalog):
    top = retrieve_top_k(SCENARIO, case_catalog, 64, BuiltinEmbeddingBackend())
    sims = [c.similarity for c in top]
    assert sims == sorted(sims, reverse=True)


def test_retrieve_k_larger_than_catalog(case_catalog):
    top = retrieve_top_k(SCENARIO, case_catalog, 1000, BuiltinEmbeddingBackend())
    assert len(top) == 64


def test_retrieve_single_entry_catalog():
    catalog = Catalog([_entry("Vehicle.Speed")])
    top = retrieve_top_k("vehicle speed", catalog, 1, BuiltinEmbeddingBackend())
    assert len(top) == 1
    assert -1.0 <= top[0].similarity <= 1.0


def test_retrieve_ties_keep_catalog_order(case_catalog):
    # An empty scenario embeds to the zero vector: every entry ties at 0.0
    # and the stable sort keeps catalog order.
    top = retrieve_top_k("", case_catalog, 64, BuiltinEmbeddingBackend())
    assert [c.entry.path for c in top] == [e.path for e in case_catalog]
    assert all(c.similarity == 0.0 for c in top)


def test_retrieve_rejects_empty_catalog():
    with pytest.raises(EmptyCatalog):
        retrieve_top_k("anything", Catalog([]), 5, BuiltinEmbeddingBackend())


def test_retrieve_rejects_bad_k(case_catalog):
    with pytest.raises(ValueError):
        retrieve_top_k("anything", case_catalog, 0, BuiltinEmbeddingBackend())


# --- rerank ------------------------------------------------------------------

def _candidates():
    return [
        RetrievalCandidate(entry=_entry("Vehicle.Powertrain.Torque", description="Actual torque"), similarity=0.4),
        RetrievalCandidate(entry=_entry("Vehicle.Cabin.HVAC.Temperature", description="Cabin temperature"), similarity=0.3),
    ]


def test_rerank_rules_boost_arithmetic():
    table = ExpansionTable(rows={"accelerating": ("speed", "pedal", "torque")}, boost_weight=0.5)
    out = rerank(_candidates(), "the car is accelerating", table)
    by_path = {c.entry.path: c for c in out}
    assert by_path["Vehicle.Powertrain.Torque"].rerank_score == pytest.approx(0.4 + 0.5)
    assert by_path["Vehicle.Cabin.HVAC.Temperature"].rerank_score == pytest.approx(0.3)


def test_rerank_counts_each_keyword_occurring():
    table = ExpansionTable(rows={"accelerating": ("speed", "pedal", "torque")}, boost_weight=0.5)
    cand = RetrievalCandidate(
        entry=_entry("Vehicle.Powertrain.AcceleratorPedal.Position",
                     description="Accelerator pedal position tracks speed demand"),
        similarity=0.1,
    )
    out = rerank([cand], "accelerating hard", table)
    # "pedal" and "speed" both occur in path+description.
    assert out[0].rerank_score == pytest.approx(0.1 + 2 * 0.5)


def test_rerank_without_trigger_changes_nothing():
    table = ExpansionTable(rows={"accelerating": ("torque",)}, boost_weight=0.5)
    out = rerank(_candidates(), "parking at the curb", table)
    assert [c.entry.path for c in out] == [c.entry.path for c in _candidates()]
    assert all(c.rerank_score == pytest.approx(c.similarity) for c in out)


def test_rerank_empty_table_is_identity_order():
    out = rerank(_candidates(), "anything", ExpansionTable())
    assert [c.entry.path for c in out] == [c.entry.path for c in _candidates()]


def test_rerank_stable_for_equal_scores():
    cands = [
        RetrievalCandidate(entry=_entry("Vehicle.A"), similarity=0.2),
        RetrievalCandidate(entry=_entry("Vehicle.B"), similarity=0.2),
    ]
    out = rerank(cands, "nothing fires", ExpansionTable())
    assert [c.entry.path for c in out] == ["Vehicle.A", "Vehicle.B"]


def test_rerank_external_provider():
    def handler(request):
        return httpx.Response(200, json={"scores": [0.1, 0.9]})

    provider = ExternalRerankProvider("http://provider", transport=httpx.MockTransport(handler))
    out = rerank(_candidates(), "scenario", provider)
    assert out[0].entry.path == "Vehicle.Cabin.HVAC.Temperature"
    assert out[0].rerank_score == pytest.approx(0.9)


def test_rerank_external_count_mismatch():
    def handler(request):
        return httpx.Response(200, json={"scores": [0.5]})

    provider = ExternalRerankProvider("http://provider", transport=httpx.MockTransport(handler))
    with pytest.raises(ProviderUnavailable):
        rerank(_candidates(), "scenario", provider)


def test_external_embed_backend_roundtrip():
    def handler(request):
        import json

        texts = json.loads(request.content)["texts"]
        return httpx.Response(200, json={"vectors": [[1.0, 0.0] for _ in texts], "dim": 2})

    backend = ExternalEmbeddingBackend("http://provider", transport=httpx.MockTransport(handler))
    vectors = backend.embed_many(["a", "b"])
    assert vectors == [(1.0, 0.0), (1.0, 0.0)]
    assert backend.dim == 2


def test_external_embed_backend_renormalizes_off_spec_vectors():
    def handler(request):
        return httpx.Response(200, json={"vectors": [[3.0, 4.0]], "dim": 2})

    backend = ExternalEmbeddingBackend("http://provider", transport=httpx.MockTransport(handler))
    assert backend.embed_many(["x"]) == [(0.6, 0.8)]


def test_external_embed_backend_unreachable():
    def handler(request):
        raise httpx.ConnectError("refused")

    backend = ExternalEmbeddingBackend("http://provider", transport=httpx.MockTransport(handler))
    with pytest.raises(ProviderUnavailable):
        backend.embed_many(["a"])


# --- make_chunks -------------------------------------------------------------

def _line_candidates(count):
    # Prompt lines of exactly 40 characters -> 10 estimated tokens each.
    from chaingen.vss_catalog import AccessorSpec, format_prompt_line

    cands = []
    for i in range(count):
        entry = VssEntry(
            path=f"Vehicle.Pad.Sign{i:02d}",
            kind="sensor",
            accessors=(AccessorSpec(f"get_sign{i:02d}", "getter", ""),),
        )
        assert len(format_prompt_line(entry)) == 40
        cands.append(RetrievalCandidate(entry=entry, similarity=0.0))
    return cands


def test_chunks_greedy_arithmetic():
    chunks = make_chunks(_line_candidates(10), token_budget=25)
    assert [len(c.lines) for c in chunks] == [2, 2, 2, 2, 2]
    assert all(c.estimated_tokens == 20 for c in chunks)


def test_chunks_single_chunk_when_budget_is_large(case_catalog):
    cands = retrieve_top_k(SCENARIO, case_catalog, 64, BuiltinEmbeddingBackend())
    chunks = make_chunks(cands, token_budget=100_000)
    assert len(chunks) == 1
    assert len(chunks[0].lines) == 64


def test_chunks_empty_input():
    assert make_chunks([], token_budget=10) == []


def test_chunks_single_line_overflow():
    with pytest.raises(SingleLineOverflow):
        make_chunks(_line_candidates(1), token_budget=9)


@given(
    count=st.integers(min_value=0, max_value=60),
    budget=st.integers(min_value=10, max_value=200),
)
def test_chunks_partition_property(count, budget):
    chunks = make_chunks(_line_candidates(count), token_budget=budget)
    flattened = [line for chunk in chunks for line in chunk.lines]
    assert flattened == [f"Vehicle.Pad.Sign{i:02d}, sensor, get_sign{i:02d}()" for i in range(count)]
    assert all(chunk.estimated_tokens <= budget for chunk in chunks)
    assert all(chunk.lines for chunk in chunks)


# --- merge & validate --------------------------------------------------------

def test_merge_dedupes_keeping_first():
    merged = merge_signal_lists(["Vehicle.Body.Lights.Hazard, Vehicle.Speed", "Vehicle.Speed"])
    assert merged == ["Vehicle.Body.Lights.Hazard", "Vehicle.Speed"]


def test_merge_strips_quotes_and_backticks():
    assert merge_signal_lists([" `Vehicle.Body.Lights.Hazard` "]) == ["Vehicle.Body.Lights.Hazard"]
    assert merge_signal_lists(['"Vehicle.Speed"\n\'Vehicle.Torque\'']) == [
        "Vehicle.Speed",
        "Vehicle.Torque",
    ]


def test_merge_empty_response():
    assert merge_signal_lists([""]) == []


@given(st.lists(st.text(alphabet="AbZ.`'\" ,\n", max_size=30), max_size=8))
def test_merge_is_idempotent(responses):
    merged = merge_signal_lists(responses)
    assert merge_signal_lists([", ".join(merged)]) == merged


def test_validate_accepts_catalog_hit(case_catalog):
    out = validate_signals(["Vehicle.Body.Lights.Hazard"], case_catalog)
    assert out == {"valid": ["Vehicle.Body.Lights.Hazard"], "rejected": []}


def test_validate_rejects_invention(case_catalog):
    out = validate_signals(["Vehicle.Imaginary.Signal"], case_catalog)
    assert out == {"valid": [], "rejected": ["Vehicle.Imaginary.Signal"]}


def test_validate_mixed_preserves_order(case_catalog):
    selected = [
        "Vehicle.Speed",
        "Vehicle.Nope.One",
        "Vehicle.Body.Lights.Hazard",
        "Vehicle.Nope.Two",
        "Vehicle.Powertrain.Torque",
    ]
    out = validate_signals(selected, case_catalog)
    assert out["valid"] == ["Vehicle.Speed", "Vehicle.Body.Lights.Hazard", "Vehicle.Powertrain.Torque"]
    assert out["rejected"] == ["Vehicle.Nope.One", "Vehicle.Nope.Two"]


@given(selected=st.lists(st.sampled_from([
    "Vehicle.Speed", "Vehicle.Body.Lights.Hazard", "vehicle.speed",
    "Vehicle.Fake.Path", "Vehicle.Powertrain.Torque", "Vehicle.Speed.Extra",
]), max_size=12))
def test_validate_matches_membership_oracle(case_catalog, selected):
    out = validate_signals(selected, case_catalog)
    catalog_paths = set(case_catalog.paths())
    assert all(p in catalog_paths for p in out["valid"])
    assert all(p not in catalog_paths for p in out["rejected"])
    deduped = list(dict.fromkeys(selected))
    assert sorted(out["valid"] + out["rejected"]) == sorted(deduped)


def test_estimate_tokens_rounds_up():
    assert estimate_tokens("") == 0
    assert estimate_tokens("abcd") == 1
    assert estimate_tokens("abcde") == 2


def test_chunk_dataclass_is_frozen():
    chunk = Chunk(lines=("a",), estimated_tokens=1)
    with pytest.raises(AttributeError):
        chunk.estimated_tokens = 2
