from .config import AppConfig, GatewaySettings, ListGenSettings, load_config, parse_config
from .prompts import (
    PromptSet,
    compose_decoder_input,
    load_prompts,
    parse_decoder_input,
    render_numbers,
)
from .store import SessionStore
from .types import ContextPair, ModelEndpoint, SessionQuadruple, now_ms

__all__ = [
    "AppConfig",
    "ContextPair",
    "GatewaySettings",
    "ListGenSettings",
    "ModelEndpoint",
    "PromptSet",
    "SessionQuadruple",
    "SessionStore",
    "compose_decoder_input",
    "load_config",
    "load_prompts",
    "now_ms",
    "parse_config",
    "parse_decoder_input",
    "render_numbers",
]
