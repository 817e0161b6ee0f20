from .client import (
    DEFAULT_TEMPERATURES,
    CallRecord,
    ChatClient,
    ChatMessage,
    ChatRequest,
    ChatResponse,
    PacingLimiter,
    parse_response_body,
)
from .corpus import (
    SWAP_VOCAB,
    MathItem,
    make_corpus,
    solve_math_text,
    swap_context,
    swap_context_inverse,
)
from .mock import mock_rules

__all__ = [
    "DEFAULT_TEMPERATURES",
    "CallRecord",
    "ChatClient",
    "ChatMessage",
    "ChatRequest",
    "ChatResponse",
    "MathItem",
    "PacingLimiter",
    "SWAP_VOCAB",
    "make_corpus",
    "mock_rules",
    "parse_response_body",
    "solve_math_text",
    "swap_context",
    "swap_context_inverse",
]
