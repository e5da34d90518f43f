"""Chat-completion gateways: HTTP with retries, scripted mock, record/replay.

Every backend exposes ``complete(request) -> ChatResponse`` and is safe to
share between threads.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Protocol

log = logging.getLogger(__name__)

ROLES = ("system", "user", "assistant")
FINISH = ("stop", "length", "error")


class GatewayError(Exception):
    pass


class AuthError(GatewayError):
    pass


class RateLimited(GatewayError):
    pass


class Timeout(GatewayError):
    pass


class ServerError(GatewayError):
    pass


class MalformedResponse(GatewayError):
    pass


class NoScriptEntry(GatewayError):
    pass


class TranscriptMiss(GatewayError):
    pass


class TransportTimeout(Exception):
    """Raised by a transport when the request did not finish in time."""


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if self.role in ("system", "user") and not self.content:
            raise ValueError(f"{self.role} message content must be non-empty")


@dataclass(frozen=True)
class ChatRequest:
    model_id: str
    messages: tuple[ChatMessage, ...]
    temperature: float = 0.0
    max_tokens: int = 512

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple(self.messages))
        if not self.messages:
            raise ValueError("request needs at least one message")
        if self.messages[0].role not in ("system", "user"):
            raise ValueError("first message must be system or user")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must lie in [0, 2]")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")

    def digest(self) -> str:
        canonical = json.dumps(
            {
                "model_id": self.model_id,
                "messages": [[m.role, m.content] for m in self.messages],
                "temperature": self.temperature,
                "max_tokens": self.max_tokens,
            },
            sort_keys=True,
            separators=(",", ":"),
            ensure_ascii=False,
        )
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def last_user_message(self) -> str:
        for m in reversed(self.messages):
            if m.role == "user":
                return m.content
        return ""

    def payload(self) -> dict:
        return {
            "model": self.model_id,
            "messages": [{"role": m.role, "content": m.content} for m in self.messages],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }


@dataclass(frozen=True)
class ChatResponse:
    content: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    finish: str = "stop"

    def __post_init__(self):
        if self.finish not in FINISH:
            raise ValueError(f"unknown finish reason {self.finish!r}")
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("token counts must be non-negative")
        if not self.content and self.finish != "error":
            raise ValueError("empty content is only allowed with finish='error'")


@dataclass(frozen=True)
class GatewayConfig:
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    token_env: str = "OPENAI_API_KEY"
    timeout: float = 30.0
    max_retries: int = 3
    backoff_base: float = 1.0
    max_in_flight: int = 4
    # backend wiring, used by make_gateway
    backend: str = "http"  # http | mock | replay | record
    model_id: str = "gpt-3.5-turbo"
    max_tokens: int = 512
    mock_rule: str | None = None
    transcript: str | None = None

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.backoff_base < 0:
            raise ValueError("backoff_base must be >= 0")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if self.backend not in ("http", "mock", "replay", "record"):
            raise ValueError(f"unknown gateway backend {self.backend!r}")


class Gateway(Protocol):
    def complete(self, request: ChatRequest) -> ChatResponse: ...


# (url, headers, json payload, timeout) -> (status code, response body text)
Transport = Callable[[str, Mapping[str, str], dict, float], tuple[int, str]]


def httpx_transport(url: str, headers: Mapping[str, str], payload: dict, timeout: float) -> tuple[int, str]:
    import httpx

    try:
        resp = httpx.post(url, headers=dict(headers), json=payload, timeout=timeout)
    except httpx.TimeoutException as exc:
        raise TransportTimeout(str(exc)) from exc
    return resp.status_code, resp.text


def backoff_delays(config: GatewayConfig) -> list[float]:
    return [config.backoff_base * 2**i for i in range(config.max_retries)]


def parse_response(body: str) -> ChatResponse:
    try:
        data = json.loads(body)
        choice = data["choices"][0]
        content = choice["message"]["content"] or ""
        usage = data.get("usage") or {}
        reason = choice.get("finish_reason") or "stop"
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise MalformedResponse(f"cannot parse completion body: {exc}") from exc
    finish = reason if reason in ("stop", "length") else "error"
    if not content and finish != "error":
        finish = "error"
    return ChatResponse(
        content,
        int(usage.get("prompt_tokens", 0) or 0),
        int(usage.get("completion_tokens", 0) or 0),
        finish,
    )


def complete(
    config: GatewayConfig,
    request: ChatRequest,
    transport: Transport | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> ChatResponse:
    transport = transport or httpx_transport
    headers = {"Content-Type": "application/json"}
    if config.token_env:
        token = os.environ.get(config.token_env, "")
        if not token:
            raise AuthError(f"environment variable {config.token_env} is not set")
        headers["Authorization"] = f"Bearer {token}"
    delays = backoff_delays(config)
    payload = request.payload()
    for attempt in range(config.max_retries + 1):
        try:
            status, body = transport(config.endpoint, headers, payload, config.timeout)
        except TransportTimeout as exc:
            failure: GatewayError = Timeout(f"timed out after {config.timeout}s: {exc}")
        else:
            if 200 <= status < 300:
                return parse_response(body)
            if status in (401, 403):
                raise AuthError(f"HTTP {status}: {body[:200]}")
            if status == 429:
                failure = RateLimited(f"HTTP 429: {body[:200]}")
            elif status >= 500:
                failure = ServerError(f"HTTP {status}: {body[:200]}")
            else:
                raise GatewayError(f"HTTP {status}: {body[:200]}")
        if attempt == config.max_retries:
            raise failure
        log.warning("attempt %d/%d failed (%s); retrying in %.2fs", attempt + 1, config.max_retries + 1, failure, delays[attempt])
        sleep(delays[attempt])
    raise AssertionError("unreachable")


class HttpGateway:
    def __init__(
        self,
        config: GatewayConfig,
        transport: Transport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.config = config
        self.transport = transport
        self.sleep = sleep
        self._slots = threading.BoundedSemaphore(config.max_in_flight)

    def complete(self, request: ChatRequest) -> ChatResponse:
        with self._slots:
            return complete(self.config, request, self.transport, self.sleep)


def _count_tokens(text: str) -> int:
    return len(text.split())


def echo_rule(request: ChatRequest) -> str:
    return request.last_user_message()


@dataclass
class MockScript:
    entries: dict[str, str] = field(default_factory=dict)
    default: Callable[[ChatRequest], str] | None = None

    def add(self, request: ChatRequest, content: str) -> MockScript:
        self.entries[request.digest()] = content
        return self


def mock_complete(script: MockScript, request: ChatRequest) -> ChatResponse:
    key = request.digest()
    if key in script.entries:
        content = script.entries[key]
    elif script.default is not None:
        content = script.default(request)
    else:
        raise NoScriptEntry(f"no scripted response for request {key[:16]}")
    prompt_tokens = sum(_count_tokens(m.content) for m in request.messages)
    return ChatResponse(content, prompt_tokens, _count_tokens(content), "stop" if content else "error")


class MockGateway:
    def __init__(self, script: MockScript | None = None, default: Callable[[ChatRequest], str] | None = None):
        self.script = script or MockScript(default=default)
        if script is not None and default is not None:
            self.script.default = default

    def complete(self, request: ChatRequest) -> ChatResponse:
        return mock_complete(self.script, request)


def _record_line(digest: str, resp: ChatResponse) -> str:
    return json.dumps(
        {
            "digest": digest,
            "content": resp.content,
            "prompt_tokens": resp.prompt_tokens,
            "completion_tokens": resp.completion_tokens,
            "finish": resp.finish,
        },
        sort_keys=True,
        ensure_ascii=False,
    )


def load_transcript(path: str | Path) -> dict[str, ChatResponse]:
    records: dict[str, ChatResponse] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                resp = ChatResponse(d["content"], d["prompt_tokens"], d["completion_tokens"], d["finish"])
                records.setdefault(d["digest"], resp)
            except (ValueError, KeyError, TypeError) as exc:
                raise MalformedResponse(f"{path}:{lineno}: bad transcript record: {exc}") from exc
    return records


def save_transcript(path: str | Path, records: Mapping[str, ChatResponse]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for digest in sorted(records):
            fh.write(_record_line(digest, records[digest]) + "\n")


class RecordingGateway:
    """Wraps a live gateway and appends every (digest, response) to a transcript."""

    def __init__(self, inner: Gateway, path: str | Path):
        self.inner = inner
        self.path = Path(path)
        self._lock = threading.Lock()
        self._seen = load_transcript(self.path) if self.path.exists() else {}

    def complete(self, request: ChatRequest) -> ChatResponse:
        resp = self.inner.complete(request)
        key = request.digest()
        with self._lock:
            if key not in self._seen:
                self._seen[key] = resp
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(_record_line(key, resp) + "\n")
        return resp


class ReplayGateway:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.records = load_transcript(self.path)

    def complete(self, request: ChatRequest) -> ChatResponse:
        key = request.digest()
        try:
            return self.records[key]
        except KeyError:
            raise TranscriptMiss(f"{self.path}: no recorded response for request {key[:16]}") from None


def record_transcript(path: str | Path, gateway: Gateway) -> RecordingGateway:
    return RecordingGateway(gateway, path)


def replay_transcript(path: str | Path) -> ReplayGateway:
    return ReplayGateway(path)


def make_gateway(config: GatewayConfig, transport: Transport | None = None) -> Gateway:
    if config.backend == "http":
        return HttpGateway(config, transport)
    if config.backend == "replay":
        if not config.transcript:
            raise ValueError("replay backend needs a transcript path")
        return ReplayGateway(config.transcript)
    from .mocks import resolve_rule

    mock = MockGateway(default=resolve_rule(config.mock_rule) if config.mock_rule else None)
    if config.backend == "record":
        if not config.transcript:
            raise ValueError("record backend needs a transcript path")
        inner: Gateway = mock if config.mock_rule else HttpGateway(config, transport)
        return RecordingGateway(inner, config.transcript)
    return mock
