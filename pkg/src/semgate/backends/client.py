"""Chat-completion client shared by every model role.

Speaks the de-facto chat-completions JSON schema (POST /v1/chat/completions)
so any cloud or local inference server can serve any role. Mock endpoints
(``mock:<rule>``) short-circuit to in-process deterministic rules but still
build and record the request body, which is what the outbound-privacy tests
inspect.

Message content never reaches logs unless content logging is explicitly
switched on.
"""

from __future__ import annotations

import json
import logging
import random
import threading
import time
from dataclasses import dataclass, field

import httpx

from ..core.types import ModelEndpoint
from ..errors import BackendUnavailableError, BackPressureError, ProtocolError
from .mock import mock_rules

log = logging.getLogger(__name__)

CHAT_COMPLETIONS_PATH = "/v1/chat/completions"

# Transformation legs sample for diversity; restoration and judging stay
# deterministic.
DEFAULT_TEMPERATURES = {
    "generate": 0.7,
    "transform": 0.7,
    "respond": 0.0,
    "restore": 0.0,
    "judge": 0.0,
}


@dataclass
class ChatMessage:
    role: str
    content: str

    def to_dict(self) -> dict:
        return {"role": self.role, "content": self.content}


@dataclass
class ChatRequest:
    messages: list[ChatMessage]
    model_name: str = ""
    temperature: float = 0.0
    max_tokens: int = 1024

    def validate(self) -> None:
        if not any(m.role == "user" for m in self.messages):
            raise ValueError("chat request needs at least one user message")
        if any(not m.content for m in self.messages):
            raise ValueError("chat message content must be non-empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")

    def body(self, default_model: str) -> dict:
        return {
            "model": self.model_name or default_model,
            "messages": [m.to_dict() for m in self.messages],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }

    @classmethod
    def user(cls, content: str, **kwargs) -> "ChatRequest":
        return cls(messages=[ChatMessage("user", content)], **kwargs)


@dataclass
class ChatResponse:
    content: str
    finish_reason: str = "stop"
    prompt_tokens: int = 0
    completion_tokens: int = 0
    latency_ms: float = 0.0


def parse_response_body(data: dict) -> ChatResponse:
    try:
        content = data["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise ProtocolError(f"response body missing choices[0].message.content: {exc}") from exc
    if not isinstance(content, str):
        raise ProtocolError("choices[0].message.content is not a string")
    usage = data.get("usage") or {}
    finish = "stop"
    try:
        finish = data["choices"][0].get("finish_reason") or "stop"
    except (IndexError, TypeError):
        pass
    return ChatResponse(
        content=content,
        finish_reason=finish,
        prompt_tokens=int(usage.get("prompt_tokens", 0)),
        completion_tokens=int(usage.get("completion_tokens", 0)),
    )


class PacingLimiter:
    """Spaces admissions at least 60/requests_per_minute seconds apart.

    Refusing instead of waiting past ``max_wait_s`` keeps limiter saturation
    distinguishable from backend failure.
    """

    def __init__(self, rate_per_minute: int, clock=time.monotonic, sleeper=time.sleep):
        self.interval = 60.0 / rate_per_minute
        self._clock = clock
        self._sleep = sleeper
        self._lock = threading.Lock()
        self._next_free = None

    def acquire(self, max_wait_s: float) -> None:
        with self._lock:
            now = self._clock()
            if self._next_free is None or self._next_free < now:
                admit_at = now
            else:
                admit_at = self._next_free
            wait = admit_at - now
            if wait > max_wait_s:
                raise BackPressureError(
                    f"rate limiter saturated: next slot in {wait:.2f}s exceeds "
                    f"wait budget {max_wait_s:.2f}s"
                )
            self._next_free = admit_at + self.interval
        if wait > 0:
            self._sleep(wait)


@dataclass
class CallRecord:
    """One outbound request, as captured for privacy instrumentation."""

    endpoint: str
    role: str
    body: str


class ChatClient:
    """Synchronous client with per-endpoint pacing and bounded-backoff retry."""

    def __init__(
        self,
        transport: httpx.BaseTransport | None = None,
        recorder=None,
        clock=time.monotonic,
        sleeper=time.sleep,
        log_content: bool = False,
        backoff_base_s: float = 0.25,
        backoff_cap_s: float = 8.0,
        jitter: random.Random | None = None,
    ):
        self._transport = transport
        self._recorder = recorder
        self._clock = clock
        self._sleep = sleeper
        self._log_content = log_content
        self._backoff_base = backoff_base_s
        self._backoff_cap = backoff_cap_s
        self._jitter = jitter or random.Random()
        self._limiters: dict[str, PacingLimiter] = {}
        self._limiter_lock = threading.Lock()
        self._http: httpx.Client | None = None
        self._http_lock = threading.Lock()

    def _client(self) -> httpx.Client:
        with self._http_lock:
            if self._http is None:
                self._http = httpx.Client(transport=self._transport)
            return self._http

    def close(self) -> None:
        if self._http is not None:
            self._http.close()

    def _limiter(self, ep: ModelEndpoint) -> PacingLimiter:
        key = f"{ep.base_url}|{ep.model_name}"
        with self._limiter_lock:
            limiter = self._limiters.get(key)
            if limiter is None:
                limiter = PacingLimiter(ep.requests_per_minute, self._clock, self._sleep)
                self._limiters[key] = limiter
            return limiter

    def _record(self, ep: ModelEndpoint, body: dict) -> None:
        if self._recorder is not None:
            self._recorder(CallRecord(
                endpoint=ep.base_url, role=ep.role,
                body=json.dumps(body, ensure_ascii=False),
            ))

    def complete(self, ep: ModelEndpoint, req: ChatRequest) -> ChatResponse:
        """Send one chat request, honoring the endpoint's limits and retries."""
        req.validate()
        body = req.body(ep.model_name)
        self._record(ep, body)
        started = self._clock()

        if ep.is_mock:
            rule = mock_rules(ep.mock_rule)
            user_content = next(
                m.content for m in reversed(req.messages) if m.role == "user"
            )
            out = rule(user_content)
            return ChatResponse(
                content=out,
                prompt_tokens=len(user_content.split()),
                completion_tokens=len(out.split()),
                latency_ms=(self._clock() - started) * 1000.0,
            )

        self._limiter(ep).acquire(max_wait_s=ep.timeout_ms / 1000.0)

        url = ep.base_url.rstrip("/") + CHAT_COMPLETIONS_PATH
        headers = {"Content-Type": "application/json"}
        key = self._api_key(ep)
        if key:
            headers["Authorization"] = f"Bearer {key}"

        attempts = ep.max_retries + 1
        last_error = ""
        for attempt in range(attempts):
            try:
                response = self._client().post(
                    url, json=body, headers=headers, timeout=ep.timeout_ms / 1000.0
                )
            except httpx.HTTPError as exc:
                last_error = f"transport error: {exc}"
            else:
                if response.status_code == 200:
                    try:
                        parsed = parse_response_body(response.json())
                    except json.JSONDecodeError as exc:
                        raise ProtocolError(f"non-JSON response body: {exc}") from exc
                    parsed.latency_ms = (self._clock() - started) * 1000.0
                    if self._log_content:
                        log.debug("completion from %s: %r", ep.base_url, parsed.content)
                    else:
                        log.debug(
                            "completion from %s: status=200 latency_ms=%.1f",
                            ep.base_url, parsed.latency_ms,
                        )
                    return parsed
                if response.status_code < 500 and response.status_code != 429:
                    raise ProtocolError(
                        f"backend {ep.base_url} rejected request: HTTP {response.status_code}"
                    )
                last_error = f"HTTP {response.status_code}"
            if attempt < attempts - 1:
                delay = min(self._backoff_base * (2 ** attempt), self._backoff_cap)
                delay *= 0.5 + self._jitter.random()
                self._sleep(delay)
        raise BackendUnavailableError(ep.base_url, attempts, last_error)

    @staticmethod
    def _api_key(ep: ModelEndpoint) -> str:
        if not ep.api_key_env:
            return ""
        import os

        return os.environ.get(ep.api_key_env, "")
