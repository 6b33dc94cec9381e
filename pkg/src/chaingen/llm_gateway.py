"""Chat-completion access with live, record, and replay modes.

The wire format is the de-facto chat-completions JSON shape (messages array
in, choices array out) against a configurable base URL. Every request has a
canonical SHA-256 digest; record mode stores request+response fixtures keyed
by that digest, and replay mode serves them back without touching the
network. With fixed fixtures the whole pipeline is bit-deterministic, which
is what the offline test suite runs on.

Transports are injectable (httpx transport objects) so tests can fake or
forbid network traffic.
"""

from __future__ import annotations

import json
import os
import tempfile
import time
from dataclasses import dataclass
from hashlib import sha256
from pathlib import Path

import httpx

from chaingen.errors import ChainGenError

ROLES = ("system", "user", "assistant")
DEFAULT_API_KEY_ENV = "LLM_API_KEY"
DEFAULT_TEMPERATURE = 0.0


class GatewayTimeout(ChainGenError):
    """The completion endpoint did not answer within the configured timeout
    (after all retries)."""


class HttpError(ChainGenError):
    """The completion endpoint returned a non-success HTTP status."""

    def __init__(self, status: int, detail: str = "") -> None:
        self.status = status
        super().__init__(f"HTTP {status}: {detail}" if detail else f"HTTP {status}")


class EmptyCompletion(ChainGenError):
    """The endpoint answered without usable completion content."""


class FixtureMissing(ChainGenError):
    """Replay mode found no fixture for the request digest."""


class MissingApiKey(ChainGenError):
    """Live/record mode needs the API key environment variable set."""


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown chat role: {self.role!r}")


@dataclass(frozen=True)
class ChatRequest:
    model: str
    messages: tuple[ChatMessage, ...]
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int | None = None

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("a chat request needs at least one message")
        if self.messages[-1].role != "user":
            raise ValueError("the last chat message must have role=user")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature out of [0, 2]: {self.temperature}")


@dataclass(frozen=True)
class ChatResponse:
    content: str
    finish_reason: str = "stop"
    usage: dict | None = None


@dataclass(frozen=True)
class ProviderConfig:
    base_url: str = "https://api.openai.com/v1"
    api_key_env: str = DEFAULT_API_KEY_ENV
    timeout_s: int = 30
    max_retries: int = 2
    mode: str = "replay"  # live | record | replay
    fixtures_dir: Path | None = None

    def __post_init__(self) -> None:
        if self.timeout_s < 1:
            raise ValueError("timeout_s must be >= 1")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.mode not in ("live", "record", "replay"):
            raise ValueError(f"unknown gateway mode: {self.mode!r}")


def _canonical_request(request: ChatRequest) -> dict:
    # Message content is whitespace-normalized so cosmetic reflows of the
    # same prompt hit the same fixture.
    return {
        "model": request.model,
        "messages": [
            {"role": m.role, "content": " ".join(m.content.split())} for m in request.messages
        ],
        "temperature": request.temperature,
        "max_tokens": request.max_tokens,
    }


def request_digest(request: ChatRequest) -> str:
    """Hex SHA-256 of the canonical request serialization; equal requests
    always digest equally."""
    canonical = json.dumps(_canonical_request(request), sort_keys=True, separators=(",", ":"))
    return sha256(canonical.encode("utf-8")).hexdigest()


def _fixture_path(config: ProviderConfig, digest: str) -> Path:
    if config.fixtures_dir is None:
        raise FixtureMissing("no fixtures directory configured")
    return Path(config.fixtures_dir) / f"{digest}.json"


def _load_fixture(config: ProviderConfig, digest: str) -> ChatResponse | None:
    path = _fixture_path(config, digest)
    if not path.is_file():
        return None
    data = json.loads(path.read_text(encoding="utf-8"))
    resp = data["response"]
    return ChatResponse(
        content=resp["content"],
        finish_reason=resp.get("finish_reason", "stop"),
        usage=resp.get("usage"),
    )


def _write_fixture(config: ProviderConfig, digest: str, request: ChatRequest, response: ChatResponse) -> None:
    path = _fixture_path(config, digest)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "digest": digest,
        "request": _canonical_request(request),
        "response": {
            "content": response.content,
            "finish_reason": response.finish_reason,
            "usage": response.usage,
        },
    }
    # Write-temp-then-rename keeps concurrent writers from torn fixtures.
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            json.dump(payload, handle, indent=2)
            handle.write("\n")
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise


def _live_complete(request: ChatRequest, config: ProviderConfig, transport=None) -> ChatResponse:
    api_key = os.environ.get(config.api_key_env)
    if not api_key:
        raise MissingApiKey(f"environment variable {config.api_key_env} is not set")
    body = {
        "model": request.model,
        "messages": [{"role": m.role, "content": m.content} for m in request.messages],
        "temperature": request.temperature,
    }
    if request.max_tokens is not None:
        body["max_tokens"] = request.max_tokens
    url = config.base_url.rstrip("/") + "/chat/completions"
    headers = {"Authorization": f"Bearer {api_key}"}

    last_error: ChainGenError | None = None
    backoff_s = 1.0
    with httpx.Client(timeout=config.timeout_s, transport=transport) as client:
        for attempt in range(config.max_retries + 1):
            if attempt > 0:
                time.sleep(backoff_s)
                backoff_s *= 2
            try:
                resp = client.post(url, json=body, headers=headers)
            except httpx.TimeoutException:
                last_error = GatewayTimeout(f"completion timed out after {config.timeout_s}s")
                continue
            except httpx.HTTPError as exc:
                last_error = HttpError(0, str(exc))
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last_error = HttpError(resp.status_code, resp.text[:200])
                continue
            if resp.status_code >= 400:
                raise HttpError(resp.status_code, resp.text[:200])
            return _parse_completion(resp.json())
    raise last_error if last_error is not None else HttpError(0, "no attempts made")


def _parse_completion(data: dict) -> ChatResponse:
    try:
        choice = data["choices"][0]
        content = choice["message"]["content"]
        finish_reason = choice.get("finish_reason", "stop")
    except (KeyError, IndexError, TypeError) as exc:
        raise EmptyCompletion(f"malformed completion payload: {exc}") from exc
    if not content:
        raise EmptyCompletion("completion content is empty")
    usage = data.get("usage")
    return ChatResponse(content=content, finish_reason=finish_reason, usage=usage)


def complete(request: ChatRequest, config: ProviderConfig, transport=None) -> ChatResponse:
    """Execute one chat completion under the configured mode.

    live: call the endpoint (with retries and exponential backoff).
    record: serve an existing fixture if present, otherwise call the endpoint
    and persist the fixture.
    replay: serve the fixture or raise FixtureMissing; never touches the
    network.
    """
    if config.mode == "live":
        return _live_complete(request, config, transport)

    digest = request_digest(request)
    if config.mode == "replay":
        fixture = _load_fixture(config, digest)
        if fixture is None:
            raise FixtureMissing(f"no fixture for request digest {digest}")
        return fixture

    # record
    fixture = _load_fixture(config, digest)
    if fixture is not None:
        return fixture
    response = _live_complete(request, config, transport)
    _write_fixture(config, digest, request, response)
    return response


class LlmGateway:
    """Convenience wrapper binding a provider config, model id, and optional
    transport, so pipeline stages can send single-prompt requests."""

    def __init__(self, config: ProviderConfig, model: str, transport=None) -> None:
        self.config = config
        self.model = model
        self._transport = transport

    def complete(self, request: ChatRequest) -> ChatResponse:
        return complete(request, self.config, transport=self._transport)

    def ask(self, prompt_text: str, temperature: float = DEFAULT_TEMPERATURE) -> str:
        """Send one user message and return the completion content."""
        request = ChatRequest(
            model=self.model,
            messages=(ChatMessage(role="user", content=prompt_text),),
            temperature=temperature,
        )
        return self.complete(request).content
