"""Domain types shared by the pipeline, the gateway, and the offline tools."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from ..errors import ConfigError

ENDPOINT_ROLES = ("cloud_cllm", "local_encoder", "local_decoder", "judge", "mock")


def now_ms() -> int:
    """Current UTC time in milliseconds since the epoch."""
    return int(time.time() * 1000)


@dataclass
class SessionQuadruple:
    """One interaction's four texts plus identifiers and timing.

    t_hat_r is absent until the cloud leg completes; t_r is absent until
    decoding completes. The record is the unit of both gateway state and
    decoder training data.
    """

    session_id: str
    t_o: str
    t_hat_o: str | None = None
    t_hat_r: str | None = None
    t_r: str | None = None
    created_at: int = 0
    completed_at: int | None = None
    meta: dict[str, str] = field(default_factory=dict)

    def validate(self) -> None:
        if not self.session_id:
            raise ValueError("session_id must be non-empty")
        if not self.t_o:
            raise ValueError("t_o must be non-empty")
        if self.t_r is not None and self.t_hat_r is None:
            raise ValueError("t_r present without t_hat_r (decode precedes cloud response)")
        if self.completed_at is not None and self.completed_at < self.created_at:
            raise ValueError("completed_at earlier than created_at")

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "t_o": self.t_o,
            "t_hat_o": self.t_hat_o,
            "t_hat_r": self.t_hat_r,
            "t_r": self.t_r,
            "created_at": self.created_at,
            "completed_at": self.completed_at,
            "meta": dict(self.meta),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SessionQuadruple":
        q = cls(
            session_id=d["session_id"],
            t_o=d["t_o"],
            t_hat_o=d.get("t_hat_o"),
            t_hat_r=d.get("t_hat_r"),
            t_r=d.get("t_r"),
            created_at=d.get("created_at", 0),
            completed_at=d.get("completed_at"),
            meta=dict(d.get("meta") or {}),
        )
        q.validate()
        return q


@dataclass
class ContextPair:
    """An (original, transformed) text pair: one encoder training example."""

    id: str
    t_o: str
    t_hat_o: str

    def validate(self) -> None:
        if not self.t_o or not self.t_hat_o:
            raise ValueError("both texts of a context pair must be non-empty")
        if not self.id:
            raise ValueError("context pair id must be non-empty")


@dataclass(frozen=True)
class ModelEndpoint:
    """A role-tagged chat-completion backend descriptor.

    base_url is either an HTTP(S) root or the literal token
    "mock:<rule-set-name>". api_key_env names the environment variable that
    holds the credential; configuration never carries the secret itself.
    """

    role: str
    base_url: str
    model_name: str = ""
    api_key_env: str = ""
    timeout_ms: int = 30_000
    max_retries: int = 2
    requests_per_minute: int = 600

    @property
    def is_mock(self) -> bool:
        return self.base_url.startswith("mock:")

    @property
    def mock_rule(self) -> str:
        return self.base_url.split(":", 1)[1] if self.is_mock else ""

    def validate(self, key_path: str = "endpoint") -> None:
        if self.role not in ENDPOINT_ROLES:
            raise ConfigError(f"{key_path}.role: unknown role {self.role!r}")
        if not self.is_mock and not self.base_url.startswith(("http://", "https://")):
            raise ConfigError(
                f"{key_path}.base_url: expected http(s) URL or mock:<rule>, got {self.base_url!r}"
            )
        for name in ("timeout_ms", "max_retries", "requests_per_minute"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"{key_path}.{name}: expected integer, got {value!r}")
        if self.timeout_ms <= 0:
            raise ConfigError(f"{key_path}.timeout_ms: must be positive")
        if self.max_retries < 0:
            raise ConfigError(f"{key_path}.max_retries: must be >= 0")
        if self.requests_per_minute < 1:
            raise ConfigError(f"{key_path}.requests_per_minute: must be >= 1")
