"""Exception hierarchy shared across the package."""

from __future__ import annotations


class SemgateError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(SemgateError):
    """Invalid or missing configuration; message names the offending key path."""


class StoreError(SemgateError):
    """Session store I/O or consistency failure."""


class DuplicateSessionError(StoreError):
    def __init__(self, session_id: str):
        super().__init__(f"duplicate session_id: {session_id!r}")
        self.session_id = session_id


class SessionNotFoundError(StoreError):
    def __init__(self, session_id: str):
        super().__init__(f"unknown session_id: {session_id!r}")
        self.session_id = session_id


class BackendError(SemgateError):
    """Base class for chat-backend failures."""


class BackendUnavailableError(BackendError):
    """Transport or server failure that persisted through the retry budget."""

    def __init__(self, endpoint: str, attempts: int, last_error: str):
        super().__init__(
            f"backend {endpoint} unavailable after {attempts} attempt(s): {last_error}"
        )
        self.attempts = attempts
        self.last_error = last_error


class ProtocolError(BackendError):
    """The backend answered, but not in the documented chat-completions shape."""


class BackPressureError(BackendError):
    """The local rate limiter could not admit the request within its wait budget."""


class GuardRejectionError(SemgateError):
    """A transformed text failed validation after exhausting retries."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class CloudUnavailableError(SemgateError):
    """The cloud leg failed; the session is preserved in a pending state."""

    def __init__(self, session_id: str, cause: Exception):
        super().__init__(f"cloud backend unavailable for session {session_id}: {cause}")
        self.session_id = session_id
        self.cause = cause


class DecodeError(SemgateError):
    """The decoder leg failed; the transformed response is withheld."""

    def __init__(self, session_id: str, cause: Exception):
        super().__init__(f"decoding failed for session {session_id}: {cause}")
        self.session_id = session_id
        self.cause = cause


class JobAbortedError(SemgateError):
    """A distillation or evaluation job exceeded its failure tolerance."""
