"""Runtime gateway: encode locally, query the cloud, decode locally, persist.

The pipeline for one query is encode -> guard -> cloud -> decode. Only the
transformed text travels on the cloud leg; the decoder is conditioned on the
same three-field composition used for its training data, so serving matches
training. Every settled query (complete, pending on cloud failure, or failed
at decode) is persisted exactly once as a session quadruple.

The HTTP surface mirrors the chat-completions schema downstream so existing
client apps can point at the gateway unchanged, plus explicit /se/* routes
for queries and inspection. Inspection routes expose originals and default
to loopback callers only.
"""

from __future__ import annotations

import logging
import threading
import time
import uuid
from dataclasses import dataclass, field

import anyio
from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse

from .backends.client import DEFAULT_TEMPERATURES, ChatClient, ChatMessage, ChatRequest
from .core.config import AppConfig
from .core.prompts import compose_decoder_input
from .core.store import SessionStore
from .core.types import SessionQuadruple, now_ms
from .errors import (
    BackendError,
    CloudUnavailableError,
    DecodeError,
    GuardRejectionError,
    SemgateError,
)
from . import guard

log = logging.getLogger(__name__)


@dataclass
class GatewayRequest:
    text: str
    session_id: str | None = None
    transparency: bool = False
    bypass: bool = False


@dataclass
class GatewayResponse:
    session_id: str
    answer: str
    transparency: dict | None = None

    def to_dict(self) -> dict:
        out = {"session_id": self.session_id, "answer": self.answer}
        if self.transparency is not None:
            out["transparency"] = self.transparency
        return out


@dataclass
class _StageTimer:
    timings_ms: dict[str, float] = field(default_factory=dict)

    def time(self, stage: str):
        timer = self

        class _Ctx:
            def __enter__(self):
                self.start = time.monotonic()

            def __exit__(self, *exc):
                timer.timings_ms[stage] = (time.monotonic() - self.start) * 1000.0

        return _Ctx()


class Gateway:
    def __init__(self, config: AppConfig, store: SessionStore, client: ChatClient,
                 lexicon: list[str] | None = None):
        self.config = config
        self.store = store
        self.client = client
        self.lexicon = lexicon or []
        self._cloud_slots = threading.BoundedSemaphore(config.gateway.max_inflight_cloud)

    # Pipeline legs

    def _encode(self, t_o: str) -> tuple[str, guard.GuardReport, int]:
        """Local encoder with guard gating and a bounded retry budget."""
        ep = self.config.endpoint("encoder")
        retries = self.config.gateway.guard_retries
        report = None
        t_hat_o = ""
        for attempt in range(retries + 1):
            resp = self.client.complete(ep, ChatRequest.user(
                t_o, temperature=DEFAULT_TEMPERATURES["transform"]
            ))
            t_hat_o = resp.content
            report = guard.check(t_o, t_hat_o, lexicon=self.lexicon)
            if report.passed:
                return t_hat_o, report, attempt
        return t_hat_o, report, retries

    def _cloud(self, t_hat_o: str, history: list[ChatMessage] | None = None) -> str:
        ep = self.config.endpoint("cloud")
        messages = list(history or []) + [ChatMessage("user", t_hat_o)]
        with self._cloud_slots:
            resp = self.client.complete(ep, ChatRequest(
                messages=messages, temperature=DEFAULT_TEMPERATURES["respond"]
            ))
        return resp.content

    def _transformed_history(self, history: list[ChatMessage]) -> list[ChatMessage]:
        """Prior turns re-expressed in transformed space for the cloud leg.

        Multi-turn proxying is an extension beyond single-exchange semantics:
        prior user turns are matched against stored originals (else encoded
        fresh), prior assistant turns against stored restored answers (else
        dropped, the privacy-safe choice).
        """
        if not history:
            return []
        records = list(reversed(self.store.all()))
        by_t_o = {}
        by_t_r = {}
        for q in records:
            if q.t_hat_o and q.t_o not in by_t_o:
                by_t_o[q.t_o] = q.t_hat_o
            if q.t_r and q.t_hat_r and q.t_r not in by_t_r:
                by_t_r[q.t_r] = q.t_hat_r
        out: list[ChatMessage] = []
        for msg in history:
            if msg.role == "user":
                known = by_t_o.get(msg.content)
                if known is None:
                    known, report, _ = self._encode(msg.content)
                    if not report.passed:
                        continue
                out.append(ChatMessage("user", known))
            elif msg.role == "assistant":
                known = by_t_r.get(msg.content)
                if known is not None:
                    out.append(ChatMessage("assistant", known))
        return out

    def _decode(self, t_o: str, t_hat_o: str, t_hat_r: str) -> str:
        ep = self.config.endpoint("decoder")
        composed = compose_decoder_input(t_o, t_hat_o, t_hat_r)
        resp = self.client.complete(ep, ChatRequest.user(
            composed, temperature=DEFAULT_TEMPERATURES["restore"]
        ))
        return resp.content

    def _persist(self, q: SessionQuadruple) -> None:
        q.created_at = q.created_at or now_ms()
        self.store.put(q)

    def handle_query(self, req: GatewayRequest,
                     history: list[ChatMessage] | None = None) -> GatewayResponse:
        """Run the full pipeline for one query and persist the outcome.

        ``history`` carries prior original-space turns (proxy surface only);
        they reach the cloud in transformed space. Raises
        GuardRejectionError, CloudUnavailableError or DecodeError on the
        respective stage failures; the session record still lands in the
        store for every failure past encoding.
        """
        if not req.text:
            raise SemgateError("query text must be non-empty")
        if req.bypass and not self.config.gateway.admin_bypass_enabled:
            raise SemgateError("bypass requested but admin bypass is disabled in config")
        session_id = req.session_id or uuid.uuid4().hex
        if session_id in self.store:
            raise SemgateError(f"session {session_id!r} already exists")
        created = now_ms()
        timer = _StageTimer()
        total_start = time.monotonic()

        guard_report = None
        if req.bypass:
            t_hat_o = req.text
        else:
            with timer.time("encode"):
                t_hat_o, guard_report, retries_used = self._encode(req.text)
            if not guard_report.passed:
                policy = self.config.gateway.guard_failure_policy
                if policy == "fallback_local_only":
                    return self._local_fallback(req, session_id, created, timer)
                raise GuardRejectionError(
                    "transformation failed validation and was not sent to the cloud: "
                    f"missing numerals {sorted(guard_report.missing_numbers)}, "
                    f"lexicon hits {[t for t, _ in guard_report.lexicon_hits]}",
                    report=guard_report,
                )

        record = SessionQuadruple(
            session_id=session_id, t_o=req.text, t_hat_o=t_hat_o, created_at=created,
            meta={"bypass": "true"} if req.bypass else {},
        )

        try:
            with timer.time("cloud"):
                cloud_history = self._transformed_history(history) if history else None
                t_hat_r = self._cloud(t_hat_o, cloud_history)
        except BackendError as exc:
            record.meta["state"] = "pending"
            self._persist(record)
            raise CloudUnavailableError(session_id, exc) from exc
        record.t_hat_r = t_hat_r

        if req.bypass:
            t_r = t_hat_r
        else:
            try:
                with timer.time("decode"):
                    t_r = self._decode(req.text, t_hat_o, t_hat_r)
            except BackendError as exc:
                record.meta["state"] = "decode_failed"
                self._persist(record)
                raise DecodeError(session_id, exc) from exc
        record.t_r = t_r
        record.completed_at = now_ms()
        timer.timings_ms["total"] = (time.monotonic() - total_start) * 1000.0
        self._persist(record)

        transparency = None
        if req.transparency and self.config.gateway.transparency_enabled:
            transparency = {
                "t_hat_o": t_hat_o,
                "t_hat_r": t_hat_r,
                "guard_report": guard_report.to_dict() if guard_report else None,
                "timings_ms": dict(timer.timings_ms),
            }
        return GatewayResponse(session_id=session_id, answer=t_r, transparency=transparency)

    def _local_fallback(self, req: GatewayRequest, session_id: str, created: int,
                        timer: _StageTimer) -> GatewayResponse:
        """Guard-failure fallback: answer with the local decoder, cloud untouched."""
        ep = self.config.endpoint("decoder")
        composed = compose_decoder_input(req.text, req.text, "")
        resp = self.client.complete(ep, ChatRequest.user(
            composed, temperature=DEFAULT_TEMPERATURES["restore"]
        ))
        record = SessionQuadruple(
            session_id=session_id, t_o=req.text, t_hat_o=None, created_at=created,
            meta={"state": "local_fallback"},
        )
        self._persist(record)
        return GatewayResponse(
            session_id=session_id,
            answer=resp.content,
            transparency={"note": "local fallback; nothing was sent to the cloud"}
            if req.transparency and self.config.gateway.transparency_enabled else None,
        )

    def get_session(self, session_id: str) -> SessionQuadruple:
        return self.store.get(session_id)

    def list_sessions(self, limit: int = 20) -> list[SessionQuadruple]:
        return self.store.recent(limit)

    def health(self) -> dict:
        endpoints = {}
        for key, ep in self.config.endpoints.items():
            endpoints[key] = {
                "kind": "mock" if ep.is_mock else "http",
                "target": ep.base_url if ep.is_mock else ep.base_url.rstrip("/"),
                "model": ep.model_name,
            }
        return {
            "status": "ok",
            "endpoints": endpoints,
            "sessions": len(self.store),
            "store_path": str(self.store.path),
        }


def build_gateway(config: AppConfig, client: ChatClient | None = None) -> Gateway:
    store = SessionStore(config.store_path)
    lexicon = guard.load_lexicon(config.lexicon_path) if config.lexicon_path else []
    return Gateway(config, store, client or ChatClient(), lexicon=lexicon)


# HTTP layer


def create_app(gateway: Gateway):
    """FastAPI app exposing the query, proxy, inspection and health routes."""
    app = FastAPI(title="semgate", docs_url=None, redoc_url=None)
    app.state.gateway = gateway

    def _local_caller(request: Request) -> bool:
        if not gateway.config.gateway.inspection_loopback_only:
            return True
        client = request.client
        return client is None or client.host in ("127.0.0.1", "::1", "testclient")

    @app.post("/se/query")
    async def se_query(payload: dict):
        text = payload.get("text", "")
        req = GatewayRequest(
            text=text,
            session_id=payload.get("session_id"),
            transparency=bool(payload.get("transparency", False)),
            bypass=bool(payload.get("bypass", False)),
        )
        try:
            resp = await anyio.to_thread.run_sync(gateway.handle_query, req)
        except GuardRejectionError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        except CloudUnavailableError as exc:
            return JSONResponse(
                status_code=502,
                content={"error": str(exc), "session_id": exc.session_id, "state": "pending"},
            )
        except DecodeError as exc:
            return JSONResponse(
                status_code=502,
                content={"error": str(exc), "session_id": exc.session_id,
                         "state": "decode_failed"},
            )
        except SemgateError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return resp.to_dict()

    @app.post("/v1/chat/completions")
    async def chat_completions(payload: dict):
        messages = payload.get("messages") or []
        last_user = None
        for i in range(len(messages) - 1, -1, -1):
            if messages[i].get("role") == "user":
                last_user = i
                break
        if last_user is None or not messages[last_user].get("content"):
            raise HTTPException(status_code=400, detail="at least one user message required")
        req = GatewayRequest(text=messages[last_user]["content"])
        history = [
            ChatMessage(m["role"], m.get("content", ""))
            for m in messages[:last_user]
            if m.get("role") in ("user", "assistant") and m.get("content")
        ]
        try:
            resp = await anyio.to_thread.run_sync(gateway.handle_query, req, history)
        except GuardRejectionError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        except (CloudUnavailableError, DecodeError) as exc:
            raise HTTPException(status_code=502, detail=str(exc))
        except SemgateError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {
            "id": f"semgate-{resp.session_id}",
            "object": "chat.completion",
            "model": payload.get("model", "semgate"),
            "choices": [{
                "index": 0,
                "message": {"role": "assistant", "content": resp.answer},
                "finish_reason": "stop",
            }],
            "usage": {"prompt_tokens": 0, "completion_tokens": 0},
        }

    @app.get("/se/sessions/{session_id}")
    async def se_session(session_id: str, request: Request):
        if not _local_caller(request):
            raise HTTPException(status_code=403, detail="inspection is loopback-only")
        try:
            return gateway.get_session(session_id).to_dict()
        except SemgateError:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")

    @app.get("/se/sessions")
    async def se_sessions(request: Request, limit: int = 20):
        if not _local_caller(request):
            raise HTTPException(status_code=403, detail="inspection is loopback-only")
        return {"sessions": [q.to_dict() for q in gateway.list_sessions(limit)]}

    @app.get("/healthz")
    async def healthz():
        return gateway.health()

    return app


def serve(config: AppConfig, listen_addr: str | None = None) -> None:
    import uvicorn

    addr = listen_addr or config.gateway.listen_addr
    host, _, port = addr.rpartition(":")
    app = create_app(build_gateway(config))
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="info")
