"""Retrieve-and-re-rank of VSS entries for a scenario, plus chunking and
signal-list post-processing.

The builtin embedding backend is a hashed term-frequency model: tokens are
hashed with 64-bit FNV-1a into a fixed number of dimensions and the vector is
L2-normalized. It is deterministic across runs and platforms, needs no
network, and is good enough to surface the right catalog entries for short
scenario texts. Neural embedding and cross-encoder re-ranking are reachable
through the external provider protocol (POST /embed, POST /rerank) instead.

Downstream of retrieval: candidates are greedily chunked to a token budget,
one selection prompt is issued per chunk, and the replies are normalized,
merged, de-duplicated, and validated against the catalog. validate_signals is
the zero-hallucination boundary: nothing absent from the catalog passes it.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace

import httpx
import yaml

from chaingen.errors import ChainGenError
from chaingen.vss_catalog import (
    Catalog,
    VssEntry,
    flatten_catalog,
    format_kb_line,
    format_prompt_line,
)

DEFAULT_DIM = 256
DEFAULT_BOOST_WEIGHT = 0.5

_FNV64_OFFSET = 0xCBF29CE484222325
_FNV64_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF

_ALNUM_RE = re.compile(r"[A-Za-z0-9]+")
_CAMEL_RE = re.compile(r"(?<=[a-z0-9])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])")


class ProviderUnavailable(ChainGenError):
    """The external embedding/re-rank provider could not be reached or
    returned an unusable payload."""


class EmptyCatalog(ChainGenError):
    """Retrieval was asked to run over a catalog with no entries."""


class SingleLineOverflow(ChainGenError):
    """A single prompt line exceeds the configured chunk token budget."""


def tokenize(text: str) -> list[str]:
    """Split text into lowercase tokens on non-alphanumeric boundaries
    (which covers ``.`` and ``_``) and camelCase transitions."""
    tokens: list[str] = []
    for run in _ALNUM_RE.findall(text):
        tokens.extend(part.lower() for part in _CAMEL_RE.split(run) if part)
    return tokens


def _fnv1a64(data: bytes) -> int:
    h = _FNV64_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV64_PRIME) & _MASK64
    return h


def estimate_tokens(text: str) -> int:
    """Crude LLM token estimate: one token per four characters, rounded up."""
    return math.ceil(len(text) / 4)


def cosine(a, b) -> float:
    """Cosine similarity; both inputs are unit vectors (or zero vectors),
    so this reduces to a dot product."""
    return sum(x * y for x, y in zip(a, b))


class BuiltinEmbeddingBackend:
    """Deterministic hashed term-frequency embedding."""

    def __init__(self, dim: int = DEFAULT_DIM) -> None:
        if dim < 1:
            raise ValueError("embedding dimension must be >= 1")
        self.dim = dim

    def embed(self, text: str) -> tuple[float, ...]:
        vec = [0.0] * self.dim
        for token in tokenize(text):
            vec[_fnv1a64(token.encode("utf-8")) % self.dim] += 1.0
        norm = math.sqrt(sum(v * v for v in vec))
        if norm == 0.0:
            return tuple(vec)
        return tuple(v / norm for v in vec)

    def embed_many(self, texts) -> list[tuple[float, ...]]:
        return [self.embed(t) for t in texts]


class ExternalEmbeddingBackend:
    """Client for the provider protocol's POST /embed endpoint."""

    def __init__(self, base_url: str, timeout_s: float = 30.0, transport=None) -> None:
        self.base_url = base_url.rstrip("/")
        self.timeout_s = timeout_s
        self._transport = transport
        self.dim: int | None = None

    def embed_many(self, texts) -> list[tuple[float, ...]]:
        texts = list(texts)
        try:
            with httpx.Client(timeout=self.timeout_s, transport=self._transport) as client:
                resp = client.post(f"{self.base_url}/embed", json={"texts": texts})
                resp.raise_for_status()
                payload = resp.json()
        except httpx.HTTPError as exc:
            raise ProviderUnavailable(f"embed request to {self.base_url} failed: {exc}") from exc
        vectors = payload.get("vectors")
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise ProviderUnavailable("embed response does not match request length")
        self.dim = payload.get("dim")
        return [self._normalized(vec) for vec in vectors]

    @staticmethod
    def _normalized(vec) -> tuple[float, ...]:
        # The protocol promises unit vectors; renormalize only when a
        # provider is visibly off so cosines stay in [-1, 1]. Conformant
        # responses pass through untouched (bit-exact).
        values = tuple(float(v) for v in vec)
        norm = math.sqrt(sum(v * v for v in values))
        if norm == 0.0 or abs(norm - 1.0) <= 1e-6:
            return values
        return tuple(v / norm for v in values)

    def embed(self, text: str) -> tuple[float, ...]:
        return self.embed_many([text])[0]


class ExternalRerankProvider:
    """Client for the provider protocol's POST /rerank endpoint."""

    def __init__(self, base_url: str, timeout_s: float = 30.0, transport=None) -> None:
        self.base_url = base_url.rstrip("/")
        self.timeout_s = timeout_s
        self._transport = transport

    def rerank(self, query: str, candidates) -> list[float]:
        candidates = list(candidates)
        try:
            with httpx.Client(timeout=self.timeout_s, transport=self._transport) as client:
                resp = client.post(
                    f"{self.base_url}/rerank",
                    json={"query": query, "candidates": candidates},
                )
                resp.raise_for_status()
                payload = resp.json()
        except httpx.HTTPError as exc:
            raise ProviderUnavailable(f"rerank request to {self.base_url} failed: {exc}") from exc
        scores = payload.get("scores")
        if not isinstance(scores, list) or len(scores) != len(candidates):
            raise ProviderUnavailable("rerank response does not match candidate count")
        return [float(s) for s in scores]


def embed_text(text: str, backend) -> tuple[float, ...]:
    """Embed one text with the given backend (builtin or external)."""
    return backend.embed(text)


@dataclass(frozen=True)
class RetrievalCandidate:
    entry: VssEntry
    similarity: float
    rerank_score: float | None = None

    def __post_init__(self) -> None:
        if not -1.0 - 1e-9 <= self.similarity <= 1.0 + 1e-9:
            raise ValueError(f"similarity out of [-1, 1]: {self.similarity}")


@dataclass(frozen=True)
class Chunk:
    lines: tuple[str, ...]
    estimated_tokens: int


@dataclass(frozen=True)
class ExpansionTable:
    """Rule-based query expansion: each trigger term present in the scenario
    boosts entries mentioning its keywords."""

    rows: dict[str, tuple[str, ...]] = field(default_factory=dict)
    boost_weight: float = DEFAULT_BOOST_WEIGHT

    def __post_init__(self) -> None:
        if self.boost_weight < 0:
            raise ValueError("boost_weight must be >= 0")
        for trigger, keywords in self.rows.items():
            terms = (trigger, *keywords)
            for term in terms:
                if not term or term != term.lower():
                    raise ValueError(f"expansion terms must be lowercase and non-empty: {term!r}")

    @classmethod
    def from_yaml(cls, text: str) -> "ExpansionTable":
        data = yaml.safe_load(text) or {}
        rows = {
            str(trigger): tuple(str(k) for k in keywords)
            for trigger, keywords in (data.get("rows") or {}).items()
        }
        return cls(rows=rows, boost_weight=float(data.get("boost_weight", DEFAULT_BOOST_WEIGHT)))


def retrieve_top_k(scenario: str, catalog: Catalog, k: int, backend) -> list[RetrievalCandidate]:
    """Rank catalog entries by cosine similarity between the scenario and
    each entry's knowledge-base line; return the top min(k, |catalog|).

    Ties keep catalog order (the sort is stable over the source ordering).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(catalog) == 0:
        raise EmptyCatalog("cannot retrieve from an empty catalog")
    kb_lines = flatten_catalog(catalog)
    vectors = backend.embed_many([scenario, *kb_lines])
    scenario_vec = vectors[0]
    candidates = [
        RetrievalCandidate(entry=entry, similarity=cosine(scenario_vec, vec))
        for entry, vec in zip(catalog, vectors[1:])
    ]
    candidates.sort(key=lambda c: -c.similarity)
    return candidates[: min(k, len(candidates))]


def rerank(candidates, scenario: str, mode) -> list[RetrievalCandidate]:
    """Re-score candidates and re-sort by rerank_score (descending, stable).

    ``mode`` is either an :class:`ExpansionTable` (lightweight domain rules)
    or an object with a ``rerank(query, candidates)`` method such as
    :class:`ExternalRerankProvider` (cross-encoder style scoring of the
    knowledge-base lines).
    """
    candidates = list(candidates)
    if isinstance(mode, ExpansionTable):
        scenario_lower = scenario.lower()
        fired_keywords = [
            keyword
            for trigger, keywords in mode.rows.items()
            if trigger in scenario_lower
            for keyword in keywords
        ]
        rescored = []
        for cand in candidates:
            haystack = f"{cand.entry.path} {cand.entry.description}".lower()
            hits = sum(1 for keyword in fired_keywords if keyword in haystack)
            rescored.append(replace(cand, rerank_score=cand.similarity + mode.boost_weight * hits))
    else:
        kb_lines = [format_kb_line(c.entry) for c in candidates]
        scores = mode.rerank(scenario, kb_lines)
        rescored = [replace(c, rerank_score=s) for c, s in zip(candidates, scores)]
    rescored.sort(key=lambda c: -c.rerank_score)
    return rescored


def make_chunks(candidates, token_budget: int) -> list[Chunk]:
    """Greedily partition candidate prompt lines into chunks within the
    token budget, preserving rank order."""
    if token_budget < 1:
        raise ValueError("token_budget must be >= 1")
    chunks: list[Chunk] = []
    current: list[str] = []
    current_tokens = 0
    for cand in candidates:
        line = format_prompt_line(cand.entry)
        line_tokens = estimate_tokens(line)
        if line_tokens > token_budget:
            raise SingleLineOverflow(
                f"prompt line needs {line_tokens} tokens, budget is {token_budget}: {line!r}"
            )
        if current and current_tokens + line_tokens > token_budget:
            chunks.append(Chunk(lines=tuple(current), estimated_tokens=current_tokens))
            current, current_tokens = [], 0
        current.append(line)
        current_tokens += line_tokens
    if current:
        chunks.append(Chunk(lines=tuple(current), estimated_tokens=current_tokens))
    return chunks


def merge_signal_lists(responses) -> list[str]:
    """Normalize, merge, and de-duplicate raw model replies into one ordered
    signal path list.

    Replies are split on commas and newlines; items are stripped of
    surrounding whitespace, quotes, and backticks; empties are dropped; exact
    duplicates keep their first occurrence.
    """
    merged: list[str] = []
    seen: set[str] = set()
    for response in responses:
        for raw in re.split(r"[,\n]", response):
            # Strip to a fixed point so alternating quote/space layers all
            # come off; this is what makes merging idempotent.
            item = raw
            while True:
                trimmed = item.strip().strip("`'\"")
                if trimmed == item:
                    break
                item = trimmed
            if not item or item in seen:
                continue
            seen.add(item)
            merged.append(item)
    return merged


def validate_signals(selected, catalog: Catalog) -> dict[str, list[str]]:
    """Partition selected paths into catalog hits and rejects.

    Exact, case-sensitive membership only — this is the boundary that keeps
    invented signal names out of everything downstream. Input duplicates are
    dropped (first occurrence wins); both output lists preserve input order.
    """
    valid: list[str] = []
    rejected: list[str] = []
    seen: set[str] = set()
    for path in selected:
        if path in seen:
            continue
        seen.add(path)
        if catalog.lookup(path) is not None:
            valid.append(path)
        else:
            rejected.append(path)
    return {"valid": valid, "rejected": rejected}
